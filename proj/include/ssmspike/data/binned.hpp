#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "ssmspike/data/dataset.hpp"

// Binned-spike container, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "SSBN"
//   4       2     version (1)
//   6       1     value type: 0 = int8, 1 = uint16, 2 = float32
//   7       1     reserved (0)
//   8       8     num_samples
//   16      4     c_in
//   20      4     num_classes
//   24      ...   per sample: u32 T, u32 label, T*c_in values (row-major)
namespace ssmspike::data {

enum class BinValueType : std::uint8_t { int8 = 0, uint16 = 1, float32 = 2 };

inline constexpr char kBinnedMagic[4] = {'S', 'S', 'B', 'N'};
inline constexpr std::uint16_t kBinnedVersion = 1;

inline std::size_t value_size(BinValueType t) {
  switch (t) {
    case BinValueType::int8: return 1;
    case BinValueType::uint16: return 2;
    case BinValueType::float32: return 4;
  }
  return 0;
}

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
  for (int k = 0; k < bytes; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
  std::uint64_t v = 0;
  for (int k = 0; k < bytes; ++k) v |= std::uint64_t{p[k]} << (8 * k);
  return v;
}

}  // namespace detail

/// Serializes `ds`; throws DataError if a value is not representable exactly.
inline std::vector<unsigned char> encode_binned(const SequenceDataset& ds, BinValueType type) {
  ds.validate();
  std::vector<unsigned char> out(kBinnedMagic, kBinnedMagic + 4);
  detail::put_le(out, kBinnedVersion, 2);
  out.push_back(static_cast<unsigned char>(type));
  out.push_back(0);
  detail::put_le(out, ds.size(), 8);
  detail::put_le(out, static_cast<std::uint32_t>(ds.c_in), 4);
  detail::put_le(out, static_cast<std::uint32_t>(ds.c_out), 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    detail::put_le(out, static_cast<std::uint32_t>(s.values.rows()), 4);
    detail::put_le(out, static_cast<std::uint32_t>(s.label), 4);
    for (Eigen::Index k = 0; k < s.values.size(); ++k) {
      const double v = s.values.data()[k];
      switch (type) {
        case BinValueType::int8:
          if (v != std::trunc(v) || v < -128 || v > 127)
            throw DataError("sample " + std::to_string(i) + ": value not representable as int8");
          out.push_back(static_cast<unsigned char>(static_cast<std::int8_t>(v)));
          break;
        case BinValueType::uint16:
          if (v != std::trunc(v) || v < 0 || v > 65535)
            throw DataError("sample " + std::to_string(i) + ": value not representable as uint16");
          detail::put_le(out, static_cast<std::uint16_t>(v), 2);
          break;
        case BinValueType::float32: {
          const auto f = static_cast<float>(v);
          if (static_cast<double>(f) != v)
            throw DataError("sample " + std::to_string(i) + ": value not representable as float32");
          std::uint32_t bits;
          std::memcpy(&bits, &f, 4);
          detail::put_le(out, bits, 4);
          break;
        }
      }
    }
  }
  return out;
}

inline SequenceDataset decode_binned(const std::vector<unsigned char>& buf, std::string name = "binned") {
  std::size_t pos = 0;
  auto need = [&](std::size_t n, const char* what) {
    if (buf.size() - pos < n) throw FormatError(name + ": truncated " + what, pos);
  };
  need(24, "header");
  if (std::memcmp(buf.data(), kBinnedMagic, 4) != 0) throw FormatError(name + ": bad magic", 0);
  const auto version = detail::get_le(buf.data() + 4, 2);
  if (version != kBinnedVersion) throw FormatError(name + ": unsupported version " + std::to_string(version), 4);
  const auto type_byte = buf[6];
  if (type_byte > 2) throw FormatError(name + ": unknown value type", 6);
  const auto type = static_cast<BinValueType>(type_byte);
  const auto count = detail::get_le(buf.data() + 8, 8);
  const auto c_in = detail::get_le(buf.data() + 16, 4);
  const auto classes = detail::get_le(buf.data() + 20, 4);
  if (c_in == 0) throw FormatError(name + ": c_in is zero", 16);
  if (classes == 0) throw FormatError(name + ": num_classes is zero", 20);
  pos = 24;

  SequenceDataset ds{std::move(name), static_cast<int>(c_in), static_cast<int>(classes), 0, {}};
  const std::size_t vs = value_size(type);
  for (std::uint64_t i = 0; i < count; ++i) {
    need(8, "sample header");
    const auto steps = detail::get_le(buf.data() + pos, 4);
    const auto label = detail::get_le(buf.data() + pos + 4, 4);
    if (steps == 0) throw FormatError(ds.name + ": sample with zero length", pos);
    if (label >= classes) throw FormatError(ds.name + ": label out of range", pos + 4);
    pos += 8;
    const std::size_t n = static_cast<std::size_t>(steps) * c_in;
    if (n > std::numeric_limits<std::size_t>::max() / vs) throw FormatError(ds.name + ": payload size overflow", pos);
    need(n * vs, "payload");
    Matrix m(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(c_in));
    for (std::size_t k = 0; k < n; ++k, pos += vs) {
      const unsigned char* p = buf.data() + pos;
      double v = 0.0;
      switch (type) {
        case BinValueType::int8: v = static_cast<std::int8_t>(p[0]); break;
        case BinValueType::uint16: v = static_cast<double>(detail::get_le(p, 2)); break;
        case BinValueType::float32: {
          const auto bits = static_cast<std::uint32_t>(detail::get_le(p, 4));
          float f;
          std::memcpy(&f, &bits, 4);
          if (!std::isfinite(f)) throw FormatError(ds.name + ": non-finite value", pos);
          v = f;
          break;
        }
      }
      m.data()[k] = v;
    }
    ds.samples.push_back({std::move(m), static_cast<int>(label)});
  }
  if (pos != buf.size()) throw FormatError(ds.name + ": trailing bytes after last sample", pos);
  return ds;
}

inline void write_binned(const std::filesystem::path& path, const SequenceDataset& ds, BinValueType type) {
  const auto bytes = encode_binned(ds, type);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write '" + path.string() + "'");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("error writing '" + path.string() + "'");
}

inline SequenceDataset load_binned_spikes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_binned(buf, path.filename().string());
}

/// Smallest value type that holds every entry exactly.
inline BinValueType infer_value_type(const SequenceDataset& ds) {
  bool integral = true, nonneg = true, small = true;
  for (const auto& s : ds.samples) {
    for (Eigen::Index k = 0; k < s.values.size(); ++k) {
      const double v = s.values.data()[k];
      integral = integral && v == std::trunc(v) && std::abs(v) <= 65535;
      nonneg = nonneg && v >= 0;
      small = small && v >= -128 && v <= 127;
    }
  }
  if (integral && small) return BinValueType::int8;
  if (integral && nonneg) return BinValueType::uint16;
  return BinValueType::float32;
}

}  // namespace ssmspike::data
