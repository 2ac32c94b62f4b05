#pragma once

#include <optional>

#include "ops.hpp"

namespace repnet {

enum class Activation { None, Relu };

template <class T>
Tensor4<T> apply_activation(Activation act, Tensor4<T> x) {
  return act == Activation::Relu ? relu(x) : x;
}

template <class T>
struct BranchConvBN {
  ConvParams<T> conv;  // bias-less; the BN affine carries the shift
  BatchNormParams<T> bn;
};

// Training-form RepVGG-style block: parallel 3x3+BN, 1x1+BN and BN-only
// identity branches, summed before one activation. The identity branch exists
// exactly when in_ch == out_ch and stride == 1.
template <class T>
struct RepConvTrain {
  int in_ch = 0, out_ch = 0, stride = 1;
  BranchConvBN<T> branch3x3;
  BranchConvBN<T> branch1x1;
  std::optional<BatchNormParams<T>> identity_bn;
  Activation activation = Activation::Relu;

  bool has_identity() const { return identity_bn.has_value(); }

  void validate() const {
    if (in_ch < 1 || out_ch < 1)
      fail(ErrorKind::Shape, "repconv channels must be >= 1, got in=", in_ch, " out=", out_ch);
    if (stride != 1 && stride != 2)
      fail(ErrorKind::Shape, "repconv stride must be 1 or 2, got ", stride);
    auto check_branch = [&](const BranchConvBN<T>& b, int k, int padding, const char* name) {
      b.conv.validate();
      b.bn.validate();
      if (b.conv.k != k || b.conv.padding != padding)
        fail(ErrorKind::Shape, "repconv ", name, " must be k=", k, " padding=", padding);
      if (b.conv.in_ch != in_ch || b.conv.out_ch != out_ch || b.conv.stride != stride)
        fail(ErrorKind::Shape, "repconv ", name, " does not match block in/out/stride");
      if (b.conv.has_bias())
        fail(ErrorKind::Shape, "repconv ", name, " must not carry a conv bias");
      if (b.bn.ch != out_ch)
        fail(ErrorKind::Shape, "repconv ", name, " BN channels (", b.bn.ch, ") != out_ch (",
             out_ch, ")");
    };
    check_branch(branch3x3, 3, 1, "3x3 branch");
    check_branch(branch1x1, 1, 0, "1x1 branch");
    const bool identity_allowed = (in_ch == out_ch && stride == 1);
    if (identity_allowed != has_identity())
      fail(ErrorKind::Shape, "repconv identity branch must be present iff in_ch == out_ch and "
                             "stride == 1 (in=", in_ch, " out=", out_ch, " stride=", stride, ")");
    if (has_identity()) {
      identity_bn->validate();
      if (identity_bn->ch != out_ch)
        fail(ErrorKind::Shape, "repconv identity BN channels (", identity_bn->ch, ") != out_ch (",
             out_ch, ")");
    }
  }

  // activation(BN(conv3x3(x)) + BN(conv1x1(x)) + [BN(x)])
  Tensor4<T> forward(const Tensor4<T>& x) const {
    if (x.c != in_ch)
      fail(ErrorKind::Shape, "repconv forward: input channels (", x.c, ") != in_ch (", in_ch, ")");
    Tensor4<T> y = batchnorm_infer(conv2d(x, branch3x3.conv), branch3x3.bn);
    y = add(y, batchnorm_infer(conv2d(x, branch1x1.conv), branch1x1.bn));
    if (has_identity()) y = add(y, batchnorm_infer(x, *identity_bn));
    return apply_activation(activation, std::move(y));
  }
};

// Inference form: the single 3x3 conv (with bias) a RepConvTrain collapses to.
template <class T>
struct FusedConv {
  ConvParams<T> params;  // k=3, padding=1, bias present
  Activation activation = Activation::Relu;

  void validate() const {
    params.validate();
    if (params.k != 3 || params.padding != 1)
      fail(ErrorKind::Shape, "fused conv must be k=3 padding=1");
    if (!params.has_bias())
      fail(ErrorKind::Shape, "fused conv must carry exactly one bias vector");
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    return apply_activation(activation, conv2d(x, params));
  }
};

// Absorb inference-mode BN into the preceding conv:
//   w'[o] = w[o] * gamma[o] / sqrt(var[o] + eps)
//   b'[o] = beta[o] - mean[o] * gamma[o] / sqrt(var[o] + eps)
//           + bias[o] * gamma[o] / sqrt(var[o] + eps)
template <class T>
ConvParams<T> fold_batchnorm(const ConvParams<T>& conv, const BatchNormParams<T>& bn) {
  conv.validate();
  bn.validate();
  if (bn.ch != conv.out_ch)
    fail(ErrorKind::Shape, "fold_batchnorm: BN channels (", bn.ch, ") != conv out_ch (",
         conv.out_ch, ")");
  ConvParams<T> out = conv;
  out.bias.assign(conv.out_ch, T(0));
  const size_t per_out = conv.weight_size() / conv.out_ch;
  for (int o = 0; o < conv.out_ch; ++o) {
    const T denom = bn.var[o] + bn.eps;
    if (!(denom > T(0)))
      fail(ErrorKind::Shape, "fold_batchnorm: var + eps <= 0 at channel ", o);
    const T t = bn.gamma[o] / std::sqrt(denom);
    T* w = out.weight.data() + static_cast<size_t>(o) * per_out;
    for (size_t i = 0; i < per_out; ++i) w[i] *= t;
    const T b0 = conv.has_bias() ? conv.bias[o] : T(0);
    out.bias[o] = bn.beta[o] - bn.mean[o] * t + b0 * t;
  }
  return out;
}

// Embed a [out, in, 1, 1] kernel at the spatial center of a [out, in, 3, 3] one.
template <class T>
std::vector<T> pad_1x1_to_3x3(const std::vector<T>& w, int out_ch, int in_ch) {
  if (w.size() != static_cast<size_t>(out_ch) * in_ch)
    fail(ErrorKind::Shape, "pad_1x1_to_3x3: weight length ", w.size(), " != ", out_ch, "*", in_ch);
  std::vector<T> padded(static_cast<size_t>(out_ch) * in_ch * 9, T(0));
  for (size_t oi = 0; oi < w.size(); ++oi) padded[oi * 9 + 4] = w[oi];
  return padded;
}

// Identity map expressed as a 3x3 conv: a Dirac kernel (center 1 on the
// matching channel), zero bias, stride 1, padding 1.
template <class T>
ConvParams<T> identity_conv(int ch) {
  if (ch < 1) fail(ErrorKind::Shape, "identity_conv: channels must be >= 1, got ", ch);
  ConvParams<T> p;
  p.out_ch = p.in_ch = ch;
  p.k = 3;
  p.stride = 1;
  p.padding = 1;
  p.weight.assign(static_cast<size_t>(ch) * ch * 9, T(0));
  for (int o = 0; o < ch; ++o)
    p.weight[(static_cast<size_t>(o) * ch + o) * 9 + 4] = T(1);
  p.bias.assign(ch, T(0));
  return p;
}

// Collapse the three training branches into one 3x3 conv: fold BN into each
// branch, widen the 1x1 kernel, materialize the identity as a Dirac conv,
// then sum weights and biases (3x3 + 1x1 + identity, in that order).
template <class T>
FusedConv<T> fuse_repconv(const RepConvTrain<T>& rc) {
  rc.validate();
  ConvParams<T> f3 = fold_batchnorm(rc.branch3x3.conv, rc.branch3x3.bn);
  ConvParams<T> f1 = fold_batchnorm(rc.branch1x1.conv, rc.branch1x1.bn);
  const std::vector<T> w1 = pad_1x1_to_3x3(f1.weight, rc.out_ch, rc.in_ch);

  FusedConv<T> fc;
  fc.activation = rc.activation;
  fc.params = std::move(f3);
  for (size_t i = 0; i < fc.params.weight.size(); ++i) fc.params.weight[i] += w1[i];
  for (int o = 0; o < rc.out_ch; ++o) fc.params.bias[o] += f1.bias[o];

  if (rc.has_identity()) {
    ConvParams<T> fid = fold_batchnorm(identity_conv<T>(rc.in_ch), *rc.identity_bn);
    for (size_t i = 0; i < fc.params.weight.size(); ++i) fc.params.weight[i] += fid.weight[i];
    for (int o = 0; o < rc.out_ch; ++o) fc.params.bias[o] += fid.bias[o];
  }
  return fc;
}

namespace detail {

template <class T>
BatchNormParams<T> random_bn(SplitMix64& rng, int ch) {
  BatchNormParams<T> bn;
  bn.ch = ch;
  bn.eps = T(1e-5);
  bn.gamma.resize(ch);
  bn.beta.resize(ch);
  bn.mean.resize(ch);
  bn.var.resize(ch);
  for (int i = 0; i < ch; ++i) {
    bn.gamma[i] = static_cast<T>(rng.range(0.9, 1.1));
    bn.beta[i] = static_cast<T>(rng.range(-0.1, 0.1));
    bn.mean[i] = static_cast<T>(rng.range(-0.1, 0.1));
    bn.var[i] = static_cast<T>(rng.range(0.8, 1.2));
  }
  return bn;
}

// He-style uniform init, scaled down so deep stacks keep activations O(1).
template <class T>
ConvParams<T> random_conv(SplitMix64& rng, int in_ch, int out_ch, int k, int stride, int padding) {
  ConvParams<T> p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.k = k;
  p.stride = stride;
  p.padding = padding;
  const double bound = 0.5 * std::sqrt(6.0 / (static_cast<double>(in_ch) * k * k));
  p.weight.resize(p.weight_size());
  for (auto& w : p.weight) w = static_cast<T>(rng.range(-bound, bound));
  return p;
}

}  // namespace detail

// gain < 1 damps every branch; residual chains (Bep units) are seeded with a
// small gain so deep stacks keep activations O(1) and absolute-tolerance
// equivalence checks stay meaningful at any depth.
template <class T>
RepConvTrain<T> random_repconv(SplitMix64& rng, int in_ch, int out_ch, int stride,
                               Activation act = Activation::Relu, double gain = 1.0) {
  RepConvTrain<T> rc;
  rc.in_ch = in_ch;
  rc.out_ch = out_ch;
  rc.stride = stride;
  rc.activation = act;
  rc.branch3x3.conv = detail::random_conv<T>(rng, in_ch, out_ch, 3, stride, 1);
  rc.branch3x3.bn = detail::random_bn<T>(rng, out_ch);
  rc.branch1x1.conv = detail::random_conv<T>(rng, in_ch, out_ch, 1, stride, 0);
  rc.branch1x1.bn = detail::random_bn<T>(rng, out_ch);
  if (in_ch == out_ch && stride == 1) rc.identity_bn = detail::random_bn<T>(rng, out_ch);
  if (gain != 1.0) {
    const T g = static_cast<T>(gain);
    for (auto& w : rc.branch3x3.conv.weight) w *= g;
    for (auto& w : rc.branch1x1.conv.weight) w *= g;
    if (rc.identity_bn)
      for (auto& v : rc.identity_bn->gamma) v *= g;
  }
  return rc;
}

struct VerificationReport {
  int trials = 0;
  double max_abs_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  uint64_t seed = 0;
};

// Compare an explicit train/fused pair on seeded random inputs.
template <class T>
VerificationReport compare_paths(const RepConvTrain<T>& rc, const FusedConv<T>& fc, int trials,
                                 double tol, uint64_t seed, int h = 8, int w = 8) {
  if (trials < 1) fail(ErrorKind::InvalidArgument, "verification trials must be >= 1");
  SplitMix64 rng(seed);
  double dev = 0.0;
  for (int t = 0; t < trials; ++t) {
    Tensor4<T> x = random_tensor<T>(rng, 1, rc.in_ch, h, w);
    dev = std::max(dev, max_abs_diff(rc.forward(x), fc.forward(x)));
  }
  return VerificationReport{trials, dev, tol, dev <= tol, seed};
}

template <class T>
VerificationReport verify_equivalence(const RepConvTrain<T>& rc, int trials, double tol,
                                      uint64_t seed, int h = 8, int w = 8) {
  return compare_paths(rc, fuse_repconv(rc), trials, tol, seed, h, w);
}

}  // namespace repnet
