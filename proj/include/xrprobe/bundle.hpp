#pragma once

// Embedding bundle wire format (all integers and floats little-endian):
//
//   magic    6 bytes  "XREMB\0"
//   version  u16      = 1
//   flags    u16      bit0: patch grids present
//   d        u32      embedding dimension
//   records until end of file:
//     id_len  u16, id bytes (UTF-8)
//     cls     d x f32
//     if bit0: h u16, w u16, then h*w*d x f32 in (row, col, channel) order

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xrprobe/error.hpp"

namespace xrprobe {

inline constexpr std::array<char, 6> kBundleMagic{'X', 'R', 'E', 'M', 'B', '\0'};
inline constexpr std::uint16_t kBundleVersion = 1;
inline constexpr std::uint16_t kFlagPatches = 0x1;

struct EmbeddingRecord {
  std::string image_id;
  std::vector<float> cls;
  std::uint16_t h = 0;
  std::uint16_t w = 0;
  std::vector<float> patches;  // h*w*d, channel fastest

  bool has_patches() const noexcept { return h > 0 && w > 0; }

  std::span<const float> patch(std::size_t row, std::size_t col) const noexcept {
    const std::size_t d = cls.size();
    return {patches.data() + (row * w + col) * d, d};
  }
};

class EmbeddingBundle {
 public:
  EmbeddingBundle() = default;
  EmbeddingBundle(std::uint32_t dim, bool with_patches) : dim_(dim), with_patches_(with_patches) {}

  std::uint32_t dim() const noexcept { return dim_; }
  bool has_patches() const noexcept { return with_patches_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<EmbeddingRecord>& records() const noexcept { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }

  /// Validates the record against the bundle invariants and appends it.
  void add(EmbeddingRecord rec) {
    const std::string where = "record " + std::to_string(records_.size()) + " ('" + rec.image_id + "')";
    if (rec.cls.size() != dim_)
      throw DataError(where + ": CLS dimension " + std::to_string(rec.cls.size()) + " != " + std::to_string(dim_));
    if (with_patches_) {
      if (!rec.has_patches()) throw DataError(where + ": empty patch grid");
      if (rec.patches.size() != std::size_t{rec.h} * rec.w * dim_)
        throw DataError(where + ": patch grid size does not match h*w*d");
    } else if (rec.has_patches() || !rec.patches.empty()) {
      throw DataError(where + ": patch grid present but bundle flags say CLS-only");
    }
    if (index_.contains(rec.image_id)) throw DataError(where + ": duplicate image_id '" + rec.image_id + "'");
    index_.emplace(rec.image_id, records_.size());
    records_.push_back(std::move(rec));
  }

  const EmbeddingRecord* find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  const EmbeddingRecord& at(std::string_view id) const {
    if (const auto* r = find(id)) return *r;
    throw DataError("image_id '" + std::string(id) + "' not found in bundle");
  }

 private:
  std::uint32_t dim_ = 0;
  bool with_patches_ = false;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

template <class U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> buf;
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
  os.write(buf.data(), buf.size());
}

inline void put_f32s(std::ostream& os, std::span<const float> xs) {
  for (float x : xs) put_le(os, std::bit_cast<std::uint32_t>(x));
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> bytes) : bytes_(std::move(bytes)) {}

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  template <class U>
  bool get(U& out) {
    if (remaining() < sizeof(U)) return false;
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += sizeof(U);
    out = static_cast<U>(v);
    return true;
  }

  bool get_bytes(std::size_t n, std::string& out) {
    if (remaining() < n) return false;
    out.assign(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return true;
  }

  bool get_f32s(std::size_t n, std::vector<float>& out) {
    if (remaining() / 4 < n) return false;
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = 0;
      get(u);
      out[i] = std::bit_cast<float>(u);
    }
    return true;
  }

 private:
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline void write_bundle(const EmbeddingBundle& bundle, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os.write(kBundleMagic.data(), kBundleMagic.size());
  detail::put_le<std::uint16_t>(os, kBundleVersion);
  detail::put_le<std::uint16_t>(os, bundle.has_patches() ? kFlagPatches : 0);
  detail::put_le<std::uint32_t>(os, bundle.dim());
  for (const auto& r : bundle.records()) {
    if (r.image_id.size() > 0xFFFF) throw DataError("image_id longer than 65535 bytes");
    detail::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(r.image_id.size()));
    os.write(r.image_id.data(), static_cast<std::streamsize>(r.image_id.size()));
    detail::put_f32s(os, r.cls);
    if (bundle.has_patches()) {
      detail::put_le<std::uint16_t>(os, r.h);
      detail::put_le<std::uint16_t>(os, r.w);
      detail::put_f32s(os, r.patches);
    }
  }
  if (!os) throw DataError("write failed for '" + path + "'");
}

/// Loads and validates a bundle. Errors name the offending record index.
inline EmbeddingBundle load_bundle(const std::string& path) {
  detail::ByteReader rd(detail::read_file_bytes(path));
  std::string magic;
  if (!rd.get_bytes(kBundleMagic.size(), magic) ||
      std::memcmp(magic.data(), kBundleMagic.data(), kBundleMagic.size()) != 0)
    throw DataError("malformed header in '" + path + "': missing XREMB magic");
  std::uint16_t version = 0, flags = 0;
  std::uint32_t dim = 0;
  if (!rd.get(version) || !rd.get(flags) || !rd.get(dim))
    throw DataError("malformed header in '" + path + "': truncated");
  if (version != kBundleVersion)
    throw DataError("malformed header in '" + path + "': unsupported version " + std::to_string(version));
  if (dim == 0) throw DataError("malformed header in '" + path + "': d must be positive");
  if ((flags & ~kFlagPatches) != 0)
    throw DataError("malformed header in '" + path + "': unknown flag bits");

  EmbeddingBundle bundle(dim, (flags & kFlagPatches) != 0);
  for (std::size_t idx = 0; !rd.at_end(); ++idx) {
    const std::string where = "'" + path + "' record " + std::to_string(idx);
    EmbeddingRecord rec;
    std::uint16_t id_len = 0;
    if (!rd.get(id_len) || !rd.get_bytes(id_len, rec.image_id)) throw DataError(where + ": truncated id");
    if (!rd.get_f32s(dim, rec.cls)) throw DataError(where + ": truncated CLS vector (dimension mismatch)");
    if (bundle.has_patches()) {
      if (!rd.get(rec.h) || !rd.get(rec.w)) throw DataError(where + ": truncated patch extents");
      if (rec.h == 0 || rec.w == 0) throw DataError(where + ": empty patch grid");
      if (!rd.get_f32s(std::size_t{rec.h} * rec.w * dim, rec.patches))
        throw DataError(where + ": truncated patch grid (dimension mismatch)");
    }
    if (bundle.find(rec.image_id)) throw DataError(where + ": duplicate image_id '" + rec.image_id + "'");
    bundle.add(std::move(rec));
  }
  return bundle;
}

}  // namespace xrprobe
