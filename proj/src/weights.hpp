#pragma once

#include <cstring>
#include <map>

#include "graph.hpp"

namespace repnet {

// REPF weight container, little-endian throughout:
//   magic "REPF" | u16 format version (=1) | u8 endianness (=1, little)
//   | u8 precision (0=f32, 1=f64) | u32 tensor count
//   | directory: { u16 name length, name bytes (UTF-8), u8 rank,
//                  u32 dims[rank], u64 payload offset } per tensor
//   | payload: contiguous tensor data in directory order
struct WeightEntry {
  std::string name;
  std::vector<uint32_t> dims;
  uint64_t offset = 0;

  uint64_t elem_count() const {
    uint64_t n = 1;
    for (uint32_t d : dims) n *= d;
    return n;
  }
};

struct WeightFileData {
  uint16_t version = 1;
  Precision precision = Precision::F64;
  std::vector<WeightEntry> entries;
  std::vector<unsigned char> payload;

  bool is_fused() const {
    for (const auto& e : entries)
      if (e.name.find(".fused.") != std::string::npos) return true;
    return false;
  }
};

// Validates magic, version, endianness, directory bounds/overlap and payload
// length; throws ErrorKind::Io on any violation.
WeightFileData read_weight_file(const std::string& path);

// Writes to <path>.tmp and renames, so a crash never leaves a half file.
void write_weight_file(const std::string& path, const WeightFileData& f);

namespace detail {

template <class T>
constexpr Precision precision_of() {
  return std::is_same_v<T, float> ? Precision::F32 : Precision::F64;
}

inline void append_le(std::vector<unsigned char>& out, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

template <class T>
void append_value(std::vector<unsigned char>& out, T v) {
  if constexpr (std::is_same_v<T, float>) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    append_le(out, bits, 4);
  } else {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    append_le(out, bits, 8);
  }
}

template <class T>
T decode_value(const unsigned char* p) {
  if constexpr (std::is_same_v<T, float>) {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(p[i]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  } else {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(p[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
}

}  // namespace detail

template <class T>
void export_weights(const NetworkGraph<T>& g, const std::string& path) {
  WeightFileData f;
  f.precision = detail::precision_of<T>();
  uint64_t offset = 0;
  for_each_tensor(g, [&](const std::string& name, const std::vector<uint32_t>& dims,
                         const T* data, size_t len) {
    f.entries.push_back(WeightEntry{name, dims, offset});
    for (size_t i = 0; i < len; ++i) detail::append_value(f.payload, data[i]);
    offset += len * sizeof(T);
  });
  write_weight_file(path, f);
}

// Fills an existing graph skeleton from file contents. The tensor name sets
// must match exactly on both sides, as must every dim list.
template <class T>
void import_weights_into(NetworkGraph<T>& g, const WeightFileData& f) {
  if (f.precision != detail::precision_of<T>())
    fail(ErrorKind::Io, "weight file precision (", precision_name(f.precision),
         ") does not match the requested graph precision (",
         precision_name(detail::precision_of<T>()), ")");
  std::map<std::string, size_t> by_name;
  for (size_t i = 0; i < f.entries.size(); ++i) {
    if (!by_name.emplace(f.entries[i].name, i).second)
      fail(ErrorKind::Io, "weight file lists tensor \"", f.entries[i].name, "\" twice");
  }
  std::vector<bool> used(f.entries.size(), false);

  for_each_tensor(g, [&](const std::string& name, const std::vector<uint32_t>& dims, T* data,
                         size_t len) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      fail(ErrorKind::Shape, "weight file is missing tensor \"", name,
           "\" required by the model spec");
    const WeightEntry& e = f.entries[it->second];
    if (e.dims != dims) {
      auto dims_str = [](const std::vector<uint32_t>& d) {
        std::string s = "[";
        for (size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
        return s + "]";
      };
      fail(ErrorKind::Shape, "tensor \"", name, "\": spec expects dims ", dims_str(dims),
           " but file has ", dims_str(e.dims));
    }
    const unsigned char* p = f.payload.data() + e.offset;
    for (size_t i = 0; i < len; ++i) data[i] = detail::decode_value<T>(p + i * sizeof(T));
    used[it->second] = true;
  });

  for (size_t i = 0; i < f.entries.size(); ++i)
    if (!used[i])
      fail(ErrorKind::Shape, "weight file tensor \"", f.entries[i].name,
           "\" has no place in the model spec");
}

template <class T>
void import_weights_into(NetworkGraph<T>& g, const std::string& path) {
  import_weights_into(g, read_weight_file(path));
}

}  // namespace repnet
