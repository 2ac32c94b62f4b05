#pragma once

#include <algorithm>
#include <cmath>

#include "tensor.hpp"

namespace repnet {

// Parameters of a dense 2-D convolution. Weight layout [out_ch][in_ch/groups][k][k].
// Only k in {1,3} and groups == 1 are supported.
template <class T>
struct ConvParams {
  int out_ch = 0, in_ch = 0;
  int k = 1, stride = 1, padding = 0, groups = 1;
  std::vector<T> weight;
  std::vector<T> bias;  // [out_ch], or empty for no bias

  bool has_bias() const { return !bias.empty(); }

  size_t weight_size() const {
    return static_cast<size_t>(out_ch) * (in_ch / groups) * k * k;
  }

  void validate() const {
    if (k != 1 && k != 3) fail(ErrorKind::Shape, "conv kernel size must be 1 or 3, got k=", k);
    if (out_ch < 1 || in_ch < 1)
      fail(ErrorKind::Shape, "conv channels must be >= 1, got in_ch=", in_ch, " out_ch=", out_ch);
    if (stride < 1) fail(ErrorKind::Shape, "conv stride must be >= 1, got ", stride);
    if (padding < 0) fail(ErrorKind::Shape, "conv padding must be >= 0, got ", padding);
    if (groups != 1)
      fail(ErrorKind::InvalidArgument, "grouped convolution is unsupported, got groups=", groups);
    if (in_ch % groups != 0 || out_ch % groups != 0)
      fail(ErrorKind::Shape, "conv channels not divisible by groups=", groups);
    if (weight.size() != weight_size())
      fail(ErrorKind::Shape, "conv weight length ", weight.size(), " != expected ", weight_size(),
           " for [", out_ch, ",", in_ch / groups, ",", k, ",", k, "]");
    if (!bias.empty() && static_cast<int>(bias.size()) != out_ch)
      fail(ErrorKind::Shape, "conv bias length ", bias.size(), " != out_ch ", out_ch);
  }
};

// Inference-mode batch normalization parameters (running statistics).
template <class T>
struct BatchNormParams {
  int ch = 0;
  std::vector<T> gamma, beta, mean, var;
  T eps = T(1e-5);

  void validate() const {
    if (ch < 1) fail(ErrorKind::Shape, "batchnorm channels must be >= 1, got ", ch);
    auto need = static_cast<size_t>(ch);
    if (gamma.size() != need || beta.size() != need || mean.size() != need || var.size() != need)
      fail(ErrorKind::Shape, "batchnorm parameter arrays must all have length ", ch);
    if (!(eps > T(0))) fail(ErrorKind::Shape, "batchnorm eps must be > 0");
    for (int i = 0; i < ch; ++i)
      if (var[i] < T(0))
        fail(ErrorKind::Shape, "batchnorm running_var[", i, "] is negative");
  }

  // gamma=1, beta=0, mean=0, var=1-eps, so that var+eps rounds to exactly 1
  // and the transform is the identity map bit for bit.
  static BatchNormParams identity(int ch, T eps = T(1e-5)) {
    BatchNormParams p;
    p.ch = ch;
    p.eps = eps;
    p.gamma.assign(ch, T(1));
    p.beta.assign(ch, T(0));
    p.mean.assign(ch, T(0));
    p.var.assign(ch, T(1) - eps);
    return p;
  }
};

inline int conv_out_dim(int in, int k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}

namespace detail {

template <class T>
void check_conv_input(const Tensor4<T>& x, const ConvParams<T>& p, const char* who) {
  p.validate();
  if (x.c != p.in_ch)
    fail(ErrorKind::Shape, who, ": input channels (", x.c, ") != weight in channels (", p.in_ch, ")");
  if (x.h + 2 * p.padding < p.k)
    fail(ErrorKind::Shape, who, ": padded input height (", x.h + 2 * p.padding,
         ") smaller than kernel (", p.k, ")");
  if (x.w + 2 * p.padding < p.k)
    fail(ErrorKind::Shape, who, ": padded input width (", x.w + 2 * p.padding,
         ") smaller than kernel (", p.k, ")");
}

}  // namespace detail

// Direct dense convolution. Zero-padding taps are skipped; per output element
// the accumulation order is fixed: input channel, then kernel row, then kernel
// column, bias added last. conv2d_oracle follows the same contract, so the two
// paths agree bitwise.
template <class T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvParams<T>& p) {
  detail::check_conv_input(x, p, "conv2d");
  const int oh = conv_out_dim(x.h, p.k, p.stride, p.padding);
  const int ow = conv_out_dim(x.w, p.k, p.stride, p.padding);
  Tensor4<T> y(x.n, p.out_ch, oh, ow);

  const int k = p.k;
  const size_t xcs = static_cast<size_t>(x.h) * x.w;
  const size_t wks = static_cast<size_t>(k) * k;
  for (int in = 0; in < x.n; ++in) {
    const T* xb = x.data.data() + static_cast<size_t>(in) * x.c * xcs;
    T* yb = y.data.data() + static_cast<size_t>(in) * p.out_ch * oh * ow;
    for (int oc = 0; oc < p.out_ch; ++oc) {
      const T* wb = p.weight.data() + static_cast<size_t>(oc) * p.in_ch * wks;
      const T b = p.has_bias() ? p.bias[oc] : T(0);
      for (int oy = 0; oy < oh; ++oy) {
        const int iy0 = oy * p.stride - p.padding;
        const int kh0 = std::max(0, -iy0);
        const int kh1 = std::min(k, x.h - iy0);
        for (int ox = 0; ox < ow; ++ox) {
          const int ix0 = ox * p.stride - p.padding;
          const int kw0 = std::max(0, -ix0);
          const int kw1 = std::min(k, x.w - ix0);
          T acc = T(0);
          for (int ic = 0; ic < p.in_ch; ++ic) {
            const T* xc = xb + static_cast<size_t>(ic) * xcs;
            const T* wc = wb + static_cast<size_t>(ic) * wks;
            for (int kh = kh0; kh < kh1; ++kh) {
              const T* xrow = xc + static_cast<size_t>(iy0 + kh) * x.w + ix0;
              const T* wrow = wc + static_cast<size_t>(kh) * k;
              for (int kw = kw0; kw < kw1; ++kw) acc += xrow[kw] * wrow[kw];
            }
          }
          yb[(static_cast<size_t>(oc) * oh + oy) * ow + ox] = acc + b;
        }
      }
    }
  }
  return y;
}

// Brute-force six-loop convolution, no pointer tricks. Ground truth for conv2d
// and for every fusion equivalence test.
template <class T>
Tensor4<T> conv2d_oracle(const Tensor4<T>& x, const ConvParams<T>& p) {
  detail::check_conv_input(x, p, "conv2d_oracle");
  const int oh = conv_out_dim(x.h, p.k, p.stride, p.padding);
  const int ow = conv_out_dim(x.w, p.k, p.stride, p.padding);
  Tensor4<T> y(x.n, p.out_ch, oh, ow);

  for (int in = 0; in < x.n; ++in)
    for (int oc = 0; oc < p.out_ch; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = T(0);
          for (int ic = 0; ic < p.in_ch; ++ic)
            for (int kh = 0; kh < p.k; ++kh)
              for (int kw = 0; kw < p.k; ++kw) {
                const int iy = oy * p.stride - p.padding + kh;
                const int ix = ox * p.stride - p.padding + kw;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += x.at(in, ic, iy, ix) *
                       p.weight[((static_cast<size_t>(oc) * p.in_ch + ic) * p.k + kh) * p.k + kw];
              }
          y.at(in, oc, oy, ox) = acc + (p.has_bias() ? p.bias[oc] : T(0));
        }
  return y;
}

// y = gamma * (x - mean) / sqrt(var + eps) + beta, per channel.
template <class T>
Tensor4<T> batchnorm_infer(const Tensor4<T>& x, const BatchNormParams<T>& p) {
  p.validate();
  if (x.c != p.ch)
    fail(ErrorKind::Shape, "batchnorm_infer: input channels (", x.c, ") != parameter channels (",
         p.ch, ")");
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  const size_t plane = static_cast<size_t>(x.h) * x.w;
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic) {
      const T s = std::sqrt(p.var[ic] + p.eps);
      const T* xp = x.data.data() + (static_cast<size_t>(in) * x.c + ic) * plane;
      T* yp = y.data.data() + (static_cast<size_t>(in) * x.c + ic) * plane;
      for (size_t i = 0; i < plane; ++i)
        yp[i] = p.gamma[ic] * (xp[i] - p.mean[ic]) / s + p.beta[ic];
    }
  return y;
}

template <class T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, x.h, x.w);
  for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

template <class T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!a.same_shape(b))
    fail(ErrorKind::Shape, "add: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
  Tensor4<T> y(a.n, a.c, a.h, a.w);
  for (size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] + b.data[i];
  return y;
}

// Channel concatenation, a's channels first.
template <class T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n)
    fail(ErrorKind::Shape, "concat_channels: batch mismatch ", a.n, " vs ", b.n);
  if (a.h != b.h || a.w != b.w)
    fail(ErrorKind::Shape, "concat_channels: spatial mismatch ", a.h, "x", a.w, " vs ", b.h, "x",
         b.w);
  Tensor4<T> y(a.n, a.c + b.c, a.h, a.w);
  const size_t plane = static_cast<size_t>(a.h) * a.w;
  for (int in = 0; in < a.n; ++in) {
    std::copy_n(a.data.data() + static_cast<size_t>(in) * a.c * plane, a.c * plane,
                y.data.data() + static_cast<size_t>(in) * y.c * plane);
    std::copy_n(b.data.data() + static_cast<size_t>(in) * b.c * plane, b.c * plane,
                y.data.data() + static_cast<size_t>(in) * y.c * plane + a.c * plane);
  }
  return y;
}

// [c0, c1) channel slice.
template <class T>
Tensor4<T> slice_channels(const Tensor4<T>& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.c || c0 >= c1)
    fail(ErrorKind::Shape, "slice_channels: bad range [", c0, ",", c1, ") for c=", x.c);
  Tensor4<T> y(x.n, c1 - c0, x.h, x.w);
  const size_t plane = static_cast<size_t>(x.h) * x.w;
  for (int in = 0; in < x.n; ++in)
    std::copy_n(x.data.data() + (static_cast<size_t>(in) * x.c + c0) * plane,
                static_cast<size_t>(c1 - c0) * plane,
                y.data.data() + static_cast<size_t>(in) * y.c * plane);
  return y;
}

// Nearest-neighbor 2x upsampling.
template <class T>
Tensor4<T> upsample_nearest2x(const Tensor4<T>& x) {
  Tensor4<T> y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int in = 0; in < x.n; ++in)
    for (int ic = 0; ic < x.c; ++ic)
      for (int iy = 0; iy < x.h; ++iy)
        for (int ix = 0; ix < x.w; ++ix) {
          const T v = x.at(in, ic, iy, ix);
          y.at(in, ic, 2 * iy, 2 * ix) = v;
          y.at(in, ic, 2 * iy, 2 * ix + 1) = v;
          y.at(in, ic, 2 * iy + 1, 2 * ix) = v;
          y.at(in, ic, 2 * iy + 1, 2 * ix + 1) = v;
        }
  return y;
}

template <class T>
double max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!a.same_shape(b))
    fail(ErrorKind::Shape, "max_abs_diff: shape mismatch ", a.shape_str(), " vs ", b.shape_str());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

}  // namespace repnet
