#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "ssmspike/data/binned.hpp"
#include "ssmspike/data/idx.hpp"
#include "ssmspike/data/synthetic.hpp"

using namespace ssmspike;
using namespace ssmspike::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ssmspike_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SequenceDataset random_dataset(std::uint64_t seed, int c_in, int classes, BinValueType type) {
  Rng rng(seed);
  std::uniform_int_distribution<int> len(1, 12), lab(0, classes - 1), i8(-128, 127), u16(0, 65535);
  std::uniform_real_distribution<float> f(-5.0f, 5.0f);
  SequenceDataset ds{"r", c_in, classes, 0, {}};
  for (int i = 0; i < 17; ++i) {
    Matrix m(len(rng), c_in);
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      switch (type) {
        case BinValueType::int8: m.data()[k] = i8(rng); break;
        case BinValueType::uint16: m.data()[k] = u16(rng); break;
        case BinValueType::float32: m.data()[k] = f(rng); break;
      }
    }
    ds.samples.push_back({m, lab(rng)});
  }
  return ds;
}

}  // namespace

TEST(Idx, RoundTripPlainAndGzip) {
  const auto dir = scratch("idx");
  IdxArray images{{3, 2, 2}, {0, 255, 17, 3, 9, 9, 9, 9, 0, 0, 0, 128}};
  IdxArray labels{{3}, {4, 0, 9}};
  for (const char* ext : {"", ".gz"}) {
    write_idx(dir / (std::string("img") + ext), images);
    write_idx(dir / (std::string("lab") + ext), labels);
    const auto back = read_idx(dir / (std::string("img") + ext));
    EXPECT_EQ(back.dims, images.dims);
    EXPECT_EQ(back.bytes, images.bytes);
    const auto ds = load_idx_pair(dir / (std::string("img") + ext), dir / (std::string("lab") + ext), "t");
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.samples[0].values.rows(), 4);
    EXPECT_EQ(ds.samples[0].values(1, 0), 1.0);
    EXPECT_EQ(ds.samples[2].label, 9);
    EXPECT_EQ(ds.samples[2].values(3, 0), 128.0 / 255.0);
  }
  fs::remove_all(dir);
}

TEST(Idx, BadMagicAndTruncation) {
  const auto dir = scratch("idx_bad");
  {
    std::ofstream f(dir / "junk", std::ios::binary);
    f << "PK\x03\x04 not an idx file";
  }
  EXPECT_THROW(read_idx(dir / "junk"), FormatError);
  write_idx(dir / "lab", IdxArray{{3}, {1, 2, 3}});
  EXPECT_THROW(read_idx(dir / "lab", 0x00000803u), FormatError);
  {
    std::ofstream f(dir / "short", std::ios::binary);
    const unsigned char b[] = {0, 0, 8, 1, 0, 0, 0, 10, 1, 2};
    f.write(reinterpret_cast<const char*>(b), sizeof b);
  }
  EXPECT_THROW(read_idx(dir / "short"), FormatError);
  EXPECT_THROW(read_idx(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST(Idx, AllZeroImageIsAllZeroSequence) {
  const auto ds = idx_to_sequences(IdxArray{{1, 28, 28}, std::vector<std::uint8_t>(784, 0)}, IdxArray{{1}, {5}}, "z");
  EXPECT_EQ(ds.samples[0].values.rows(), 784);
  EXPECT_TRUE(ds.samples[0].values.isZero(0.0));
}

TEST(Idx, BundledSubset) {
  const auto [train, test] = load_smnist(SmnistPaths::in_directory(fs::path(SSMSPIKE_TEST_DATA) / "mnist-subset"));
  EXPECT_EQ(train.size(), 8000u);
  EXPECT_EQ(test.size(), 2000u);
  std::set<int> labels;
  for (const auto* ds : {&train, &test})
    for (const auto& s : ds->samples) {
      ASSERT_EQ(s.values.rows(), 784);
      ASSERT_EQ(s.values.cols(), 1);
      ASSERT_GE(s.values.minCoeff(), 0.0);
      ASSERT_LE(s.values.maxCoeff(), 1.0);
      labels.insert(s.label);
    }
  EXPECT_EQ(labels.size(), 10u);
}

TEST(Binned, RoundTripEveryValueType) {
  for (auto type : {BinValueType::int8, BinValueType::uint16, BinValueType::float32}) {
    const auto ds = random_dataset(static_cast<std::uint64_t>(type) + 1, 3, 5, type);
    const auto back = decode_binned(encode_binned(ds, type));
    EXPECT_EQ(back.c_in, 3);
    EXPECT_EQ(back.c_out, 5);
    EXPECT_EQ(back.samples, ds.samples);
    EXPECT_EQ(infer_value_type(ds), type);
  }
}

TEST(Binned, TernarySpikesRoundTripThroughFile) {
  const auto dir = scratch("binned");
  SequenceDataset ds{"t", 2, 3, 0, {}};
  Matrix m(3, 2);
  m << 1, -1, 0, 0, -1, 1;
  ds.samples.push_back({m, 2});
  write_binned(dir / "x.bin", ds, infer_value_type(ds));
  EXPECT_EQ(fs::file_size(dir / "x.bin"), 24u + 8u + 6u);
  const auto back = load_binned_spikes(dir / "x.bin");
  EXPECT_EQ(back.samples, ds.samples);
  fs::remove_all(dir);
}

TEST(Binned, RejectsMismatchedChannelCount) {
  SequenceDataset ds{"t", 2, 3, 0, {}};
  ds.samples.push_back({Matrix::Zero(4, 3), 0});
  EXPECT_ANY_THROW(encode_binned(ds, BinValueType::int8));
}

TEST(Binned, TruncationReportsOffset) {
  SequenceDataset ds{"t", 2, 3, 0, {}};
  ds.samples.push_back({Matrix::Ones(5, 2), 1});
  auto bytes = encode_binned(ds, BinValueType::uint16);
  bytes.resize(bytes.size() - 3);
  try {
    decode_binned(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 32u);
  }
  auto bad = encode_binned(ds, BinValueType::uint16);
  bad[0] = 'X';
  EXPECT_THROW(decode_binned(bad), FormatError);
  auto bad_label = encode_binned(ds, BinValueType::uint16);
  bad_label[28] = 7;
  try {
    decode_binned(bad_label);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 28u);
  }
  auto trailing = encode_binned(ds, BinValueType::uint16);
  trailing.push_back(0);
  EXPECT_THROW(decode_binned(trailing), FormatError);
}

TEST(SumBin, Examples) {
  Matrix m(4, 1);
  m << 1, 1, 1, 1;
  EXPECT_EQ(sum_bin(m, 4), Matrix::Constant(1, 1, 4.0));
  EXPECT_EQ(sum_bin(m, 1), m);
  EXPECT_EQ(sum_bin(Matrix::Ones(201, 3), 4).rows(), 51);
  EXPECT_EQ(sum_bin(Matrix::Ones(201, 3), 4)(50, 2), 1.0);
  EXPECT_THROW(sum_bin(m, 0), ConfigError);
}

TEST(SumBin, ConservesColumnTotals) {
  Rng rng(3);
  std::uniform_int_distribution<int> v(-1, 1), len(1, 60), bin(1, 9);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix m(len(rng), 3);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = v(rng);
    const auto b = sum_bin(m, bin(rng));
    EXPECT_EQ(b.colwise().sum(), m.colwise().sum());
  }
}

TEST(Synthetic, NearestTemplateIsPerfectWithoutNoise) {
  SynthConfig cfg;
  cfg.num_classes = 4;
  cfg.noise = 0.0;
  cfg.seed = 9;
  const auto templates = synth_pattern_templates(cfg);
  const auto ds = synth_pattern_task(cfg);
  EXPECT_EQ(ds.size(), 400u);
  for (const auto& s : ds.samples) {
    int best = -1;
    double best_d = 1e9;
    for (std::size_t c = 0; c < templates.size(); ++c) {
      const double d = (s.values - templates[c]).cwiseAbs().sum();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    ASSERT_EQ(best, s.label);
    ASSERT_EQ(best_d, 0.0);
  }
  for (std::size_t a = 0; a < templates.size(); ++a)
    for (std::size_t b = a + 1; b < templates.size(); ++b) EXPECT_NE(templates[a], templates[b]);
}

TEST(Synthetic, ClassesAgreeBeforeTheBurst) {
  SynthConfig cfg;
  cfg.num_classes = 3;
  const auto t = synth_pattern_templates(cfg);
  EXPECT_EQ(t[0].topRows(cfg.steps / 2), t[1].topRows(cfg.steps / 2));
  EXPECT_EQ(t[0].topRows(cfg.steps / 2), t[2].topRows(cfg.steps / 2));
}

TEST(Synthetic, DeterministicAndSeedSensitive) {
  SynthConfig cfg;
  cfg.seed = 4;
  const auto a = synth_pattern_task(cfg), b = synth_pattern_task(cfg);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.size(), 200u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].label, static_cast<int>(i % 2));
  cfg.seed = 5;
  EXPECT_NE(synth_pattern_task(cfg).samples, a.samples);
}

TEST(Synthetic, InvalidConfig) {
  SynthConfig cfg;
  cfg.noise = 0.7;
  EXPECT_THROW(synth_pattern_task(cfg), ConfigError);
  cfg = {};
  cfg.steps = 3;
  EXPECT_THROW(synth_pattern_task(cfg), ConfigError);
}

TEST(Dataset, ValidationSplitIsDisjointAndReproducible) {
  SynthConfig cfg;
  cfg.samples_per_class = 50;
  auto ds = synth_pattern_task(cfg);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.samples[i].values(0, 0) = static_cast<double>(i);
  const auto [tr, va] = validation_split(ds, 0.2, 11);
  const auto [tr2, va2] = validation_split(ds, 0.2, 11);
  EXPECT_EQ(va.size(), 20u);
  EXPECT_EQ(tr.size(), 80u);
  EXPECT_EQ(va.samples, va2.samples);
  std::set<double> ids;
  for (const auto* part : {&tr, &va})
    for (const auto& s : part->samples) ids.insert(s.values(0, 0));
  EXPECT_EQ(ids.size(), 100u);
  EXPECT_THROW(validation_split(ds, 1.0, 0), ConfigError);
}

TEST(Dataset, MakeBatchPadsAndRecordsLengths) {
  SequenceDataset ds{"p", 2, 2, 0, {}};
  ds.samples.push_back({Matrix::Ones(3, 2), 1});
  ds.samples.push_back({Matrix::Constant(1, 2, 2.0), 0});
  const std::vector<std::size_t> idx = {0, 1};
  const auto b = make_batch(ds, idx);
  EXPECT_EQ(b.steps, 3u);
  EXPECT_EQ(b.size, 2u);
  EXPECT_EQ(b.lengths, (std::vector<std::size_t>{3, 1}));
  EXPECT_EQ(b.inputs(1, 0), 2.0);   // t=0, b=1
  EXPECT_EQ(b.inputs(3, 1), 0.0);   // t=1, b=1 padded
  EXPECT_EQ(b.inputs(4, 0), 1.0);   // t=2, b=0
  EXPECT_EQ(b.labels, (std::vector<int>{1, 0}));
}
