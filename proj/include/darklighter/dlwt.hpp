#pragma once

// DLWT named-tensor container. All integers little-endian:
//
//   "DLWT" | u32 version (=1) | u32 tensor_count
//   per tensor: u32 name_len | name (UTF-8) | u8 dtype (0 = f32) | u8 ndim |
//               u64 dims[ndim] | f32 payload[product(dims)] (row-major)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "darklighter/error.hpp"

namespace darklighter {

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1}, std::multiplies<>());
  }
  std::string dims_string() const {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      s += (i ? "x" : "") + std::to_string(dims[i]);
    }
    return dims.empty() ? "scalar" : s;
  }
  bool operator==(const NamedTensor&) const = default;
};

inline constexpr std::uint32_t kDlwtVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > remaining()) {
      throw FormatError("DLWT: truncated data at byte " + std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_dlwt(const std::vector<NamedTensor>& tensors) {
  std::set<std::string> seen;
  detail::ByteWriter out;
  out.raw("DLWT");
  out.u32(kDlwtVersion);
  out.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) {
      throw InvalidArgument("DLWT: duplicate tensor name '" + t.name + "'");
    }
    if (t.dims.size() > 255) {
      throw InvalidArgument("DLWT: tensor '" + t.name + "' has too many dimensions");
    }
    if (t.element_count() != t.values.size()) {
      throw InvalidArgument("DLWT: tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                            " values for dims " + t.dims_string());
    }
    out.u32(static_cast<std::uint32_t>(t.name.size()));
    out.raw(t.name);
    out.u8(0);
    out.u8(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) out.u64(d);
    for (float v : t.values) out.f32(v);
  }
  return out.take();
}

inline std::vector<NamedTensor> decode_dlwt(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || in.raw(4) != "DLWT") {
    throw FormatError("DLWT: bad magic");
  }
  const auto version = in.u32();
  if (version != kDlwtVersion) {
    throw FormatError("DLWT: unsupported version " + std::to_string(version));
  }
  const auto count = in.u32();
  std::vector<NamedTensor> tensors;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.raw(in.u32());
    if (!seen.insert(t.name).second) {
      throw FormatError("DLWT: duplicate tensor name '" + t.name + "'");
    }
    const auto dtype = in.u8();
    if (dtype != 0) {
      throw FormatError("DLWT: tensor '" + t.name + "' has unsupported dtype " + std::to_string(dtype));
    }
    const auto ndim = in.u8();
    for (std::uint8_t d = 0; d < ndim; ++d) t.dims.push_back(in.u64());
    const auto n = t.element_count();
    if (n > in.remaining() / 4) {
      throw FormatError("DLWT: truncated payload for tensor '" + t.name + "'");
    }
    t.values.resize(n);
    for (auto& v : t.values) v = in.f32();
    tensors.push_back(std::move(t));
  }
  if (in.remaining() != 0) {
    throw FormatError("DLWT: " + std::to_string(in.remaining()) + " trailing bytes");
  }
  return tensors;
}

/// Writes through a temporary file and renames, so readers never see a partial file.
inline void write_dlwt(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  const auto bytes = encode_dlwt(tensors);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open '" + tmp.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      throw IoError("failed writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move weights into '" + path.string() + "'");
  }
}

inline std::vector<NamedTensor> read_dlwt(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open weight file '" + path.string() + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_dlwt(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline const NamedTensor* find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

/// Looks up `name` and checks its dims; throws SchemaError naming the tensor.
inline const NamedTensor& require_tensor(const std::vector<NamedTensor>& tensors, const std::string& name,
                                         const std::vector<std::uint64_t>& dims) {
  const auto* t = find_tensor(tensors, name);
  if (!t) {
    throw SchemaError("missing tensor '" + name + "'");
  }
  if (t->dims != dims) {
    NamedTensor expected{name, dims, {}};
    throw SchemaError("tensor '" + name + "' has shape " + t->dims_string() + ", expected " +
                      expected.dims_string());
  }
  return *t;
}

}  // namespace darklighter
