#pragma once

#include <cstdint>
#include <vector>

#include "error.hpp"

namespace repnet {

// Run-level numeric width. Chosen once per model/run, never per op;
// f64 is the mode used for all exactness claims.
enum class Precision { F32, F64 };

inline int element_bytes(Precision p) { return p == Precision::F32 ? 4 : 8; }
inline const char* precision_name(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

// Dense NCHW tensor, row-major, the only data carrier in the library.
template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      fail(ErrorKind::Shape, "tensor dims must all be >= 1, got ", shape_str());
    data.assign(static_cast<size_t>(n) * c * h * w, T(0));
  }

  size_t size() const { return data.size(); }

  size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
  }
  T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
  const T& at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }

  std::string shape_str() const { return cat(n, "x", c, "x", h, "x", w); }
};

// Deterministic PRNG (splitmix64). Used for every seeded draw so runs are
// reproducible across platforms and standard-library versions.
class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // uniform integer in [lo, hi]
  int range_int(int lo, int hi) {
    return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
  }

private:
  uint64_t state_;
};

template <class T>
Tensor4<T> random_tensor(SplitMix64& rng, int n, int c, int h, int w,
                         double lo = -1.0, double hi = 1.0) {
  Tensor4<T> t(n, c, h, w);
  for (auto& v : t.data) v = static_cast<T>(rng.range(lo, hi));
  return t;
}

}  // namespace repnet
