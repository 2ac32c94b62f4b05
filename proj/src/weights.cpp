#include "weights.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace repnet {

namespace {

constexpr char kMagic[4] = {'R', 'E', 'P', 'F'};
constexpr uint16_t kFormatVersion = 1;

class Reader {
public:
  Reader(const unsigned char* p, size_t n, const std::string& path) : p_(p), n_(n), path_(path) {}

  const unsigned char* take(size_t n, const char* what) {
    if (pos_ + n > n_)
      fail(ErrorKind::Io, path_, ": truncated weight file while reading ", what);
    const unsigned char* q = p_ + pos_;
    pos_ += n;
    return q;
  }

  uint64_t le(int bytes, const char* what) {
    const unsigned char* q = take(bytes, what);
    uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(q[i]) << (8 * i);
    return v;
  }

  size_t remaining() const { return n_ - pos_; }
  size_t pos() const { return pos_; }

private:
  const unsigned char* p_;
  size_t n_;
  size_t pos_ = 0;
  const std::string& path_;
};

}  // namespace

WeightFileData read_weight_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open weight file ", path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  Reader r(bytes.data(), bytes.size(), path);

  const unsigned char* magic = r.take(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorKind::Io, path, ": not a REPF weight file (magic mismatch)");
  WeightFileData f;
  f.version = static_cast<uint16_t>(r.le(2, "format version"));
  if (f.version != kFormatVersion)
    fail(ErrorKind::Io, path, ": unsupported format version ", f.version);
  const uint64_t endian = r.le(1, "endianness flag");
  if (endian != 1) fail(ErrorKind::Io, path, ": unsupported endianness flag ", endian);
  const uint64_t prec = r.le(1, "precision flag");
  if (prec != 0 && prec != 1) fail(ErrorKind::Io, path, ": unknown precision flag ", prec);
  f.precision = prec == 0 ? Precision::F32 : Precision::F64;
  const int esize = element_bytes(f.precision);

  const uint64_t count = r.le(4, "tensor count");
  f.entries.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    WeightEntry e;
    const uint64_t name_len = r.le(2, "tensor name length");
    const unsigned char* name = r.take(name_len, "tensor name");
    e.name.assign(reinterpret_cast<const char*>(name), name_len);
    const uint64_t rank = r.le(1, "tensor rank");
    for (uint64_t d = 0; d < rank; ++d)
      e.dims.push_back(static_cast<uint32_t>(r.le(4, "tensor dims")));
    e.offset = r.le(8, "tensor offset");
    f.entries.push_back(std::move(e));
  }

  f.payload.assign(bytes.begin() + r.pos(), bytes.end());

  // Directory sanity: every tensor in bounds, no two overlapping.
  std::vector<std::pair<uint64_t, uint64_t>> spans;  // offset, end
  for (const auto& e : f.entries) {
    const uint64_t size = e.elem_count() * esize;
    if (e.offset + size > f.payload.size())
      fail(ErrorKind::Io, path, ": truncated payload, tensor \"", e.name, "\" needs bytes [",
           e.offset, ",", e.offset + size, ") but payload has ", f.payload.size());
    spans.emplace_back(e.offset, e.offset + size);
  }
  std::sort(spans.begin(), spans.end());
  for (size_t i = 1; i < spans.size(); ++i)
    if (spans[i].first < spans[i - 1].second)
      fail(ErrorKind::Io, path, ": directory entries overlap in the payload");
  return f;
}

void write_weight_file(const std::string& path, const WeightFileData& f) {
  std::vector<unsigned char> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  detail::append_le(out, kFormatVersion, 2);
  detail::append_le(out, 1, 1);  // little-endian
  detail::append_le(out, f.precision == Precision::F32 ? 0 : 1, 1);
  detail::append_le(out, f.entries.size(), 4);
  for (const auto& e : f.entries) {
    if (e.name.size() > 0xffff)
      fail(ErrorKind::Io, "tensor name too long for the directory: ", e.name);
    detail::append_le(out, e.name.size(), 2);
    out.insert(out.end(), e.name.begin(), e.name.end());
    detail::append_le(out, e.dims.size(), 1);
    for (uint32_t d : e.dims) detail::append_le(out, d, 4);
    detail::append_le(out, e.offset, 8);
  }
  out.insert(out.end(), f.payload.begin(), f.payload.end());

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::Io, "cannot open ", tmp, " for writing");
    os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!os) fail(ErrorKind::Io, "failed writing ", tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    fail(ErrorKind::Io, "failed to move ", tmp, " into place at ", path);
}

}  // namespace repnet
