#pragma once

#include <zlib.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssmspike/data/dataset.hpp"

namespace ssmspike::data {

/// Decoded IDX tensor of unsigned bytes.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

namespace detail {

class GzReader {
 public:
  explicit GzReader(const std::filesystem::path& path) : path_(path.string()) {
    f_ = gzopen(path_.c_str(), "rb");
    if (!f_) throw DataError("cannot open '" + path_ + "'");
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;
  ~GzReader() { gzclose(f_); }

  void read(void* dst, std::size_t count) {
    auto* p = static_cast<unsigned char*>(dst);
    while (count > 0) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(count, 1u << 30));
      const int got = gzread(f_, p, chunk);
      if (got <= 0) throw FormatError("'" + path_ + "': truncated file", offset_);
      p += got;
      count -= static_cast<std::size_t>(got);
      offset_ += static_cast<std::uint64_t>(got);
    }
  }

  std::uint32_t read_be32() {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  gzFile f_ = nullptr;
  std::uint64_t offset_ = 0;
};

}  // namespace detail

/// Reads an unsigned-byte IDX file, plain or gzip-compressed.
inline IdxArray read_idx(const std::filesystem::path& path, std::optional<std::uint32_t> expected_magic = std::nullopt) {
  detail::GzReader r(path);
  const std::uint32_t magic = r.read_be32();
  if ((magic >> 16) != 0 || ((magic >> 8) & 0xFF) != 0x08)
    throw FormatError("'" + r.path() + "': not an unsigned-byte IDX file", 0);
  if (expected_magic && magic != *expected_magic) throw FormatError("'" + r.path() + "': unexpected IDX magic", 0);
  IdxArray a;
  const std::uint32_t rank = magic & 0xFF;
  if (rank < 1) throw FormatError("'" + r.path() + "': IDX rank 0", 3);
  std::size_t total = 1;
  for (std::uint32_t k = 0; k < rank; ++k) {
    a.dims.push_back(r.read_be32());
    total *= a.dims.back();
  }
  a.bytes.resize(total);
  r.read(a.bytes.data(), total);
  return a;
}

inline void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  const bool gz = path.extension() == ".gz";
  gzFile f = gzopen(path.string().c_str(), gz ? "wb9" : "wbT");
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  auto put32 = [&](std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    gzwrite(f, b, 4);
  };
  put32(0x0800u | static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put32(d);
  if (!a.bytes.empty()) gzwrite(f, a.bytes.data(), static_cast<unsigned>(a.bytes.size()));
  if (gzclose(f) != Z_OK) throw DataError("error writing '" + path.string() + "'");
}

/// Images become row-major flattened sequences (T = rows*cols, one input
/// channel) with pixel values scaled to [0, 1].
inline SequenceDataset idx_to_sequences(const IdxArray& images, const IdxArray& labels, std::string name) {
  if (images.dims.size() != 3) throw FormatError(name + ": image file must have rank 3", 0);
  if (labels.dims.size() != 1) throw FormatError(name + ": label file must have rank 1", 0);
  if (images.dims[0] != labels.dims[0]) throw FormatError(name + ": image and label counts differ", 4);
  const std::size_t count = images.dims[0], pixels = std::size_t{images.dims[1]} * images.dims[2];
  SequenceDataset ds{std::move(name), 1, 10, 0, {}};
  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Matrix m(static_cast<Eigen::Index>(pixels), 1);
    for (std::size_t p = 0; p < pixels; ++p) m(static_cast<Eigen::Index>(p), 0) = images.bytes[i * pixels + p] / 255.0;
    const int label = labels.bytes[i];
    if (label > 9) throw FormatError(ds.name + ": label above 9", 8 + i);
    ds.samples.push_back({std::move(m), label});
  }
  return ds;
}

inline SequenceDataset load_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                                     std::string name) {
  return idx_to_sequences(read_idx(images, 0x00000803u), read_idx(labels, 0x00000801u), std::move(name));
}

struct SmnistPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  /// Standard file names inside `dir`, with or without a .gz suffix.
  static SmnistPaths in_directory(const std::filesystem::path& dir) {
    auto pick = [&](const std::string& stem) {
      for (const char* ext : {"", ".gz"}) {
        auto p = dir / (stem + ext);
        if (std::filesystem::exists(p)) return p;
      }
      throw DataError("missing '" + stem + "' in " + dir.string());
    };
    return {pick("train-images-idx3-ubyte"), pick("train-labels-idx1-ubyte"), pick("t10k-images-idx3-ubyte"),
            pick("t10k-labels-idx1-ubyte")};
  }
};

/// (train, test) sequential-MNIST datasets.
inline std::pair<SequenceDataset, SequenceDataset> load_smnist(const SmnistPaths& p) {
  return {load_idx_pair(p.train_images, p.train_labels, "smnist-train"),
          load_idx_pair(p.test_images, p.test_labels, "smnist-test")};
}

}  // namespace ssmspike::data
