#pragma once

#include <variant>

#include "repconv.hpp"

namespace repnet {

// Plain conv + BN + ReLU, used for CSP split/merge projections and the neck's
// lateral and downsample convs.
template <class T>
struct ConvModule {
  ConvParams<T> conv;  // bias-less, k = 1 or 3
  BatchNormParams<T> bn;
  Activation activation = Activation::Relu;

  int in_ch() const { return conv.in_ch; }
  int out_ch() const { return conv.out_ch; }

  void validate() const {
    conv.validate();
    bn.validate();
    if (bn.ch != conv.out_ch)
      fail(ErrorKind::Shape, "conv module BN channels (", bn.ch, ") != conv out_ch (",
           conv.out_ch, ")");
    if (conv.has_bias())
      fail(ErrorKind::Shape, "conv module conv must not carry a bias");
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    return apply_activation(activation, batchnorm_infer(conv2d(x, conv), bn));
  }
};

template <class T>
ConvModule<T> random_conv_module(SplitMix64& rng, int in_ch, int out_ch, int k, int stride) {
  ConvModule<T> m;
  m.conv = detail::random_conv<T>(rng, in_ch, out_ch, k, stride, k == 3 ? 1 : 0);
  m.bn = detail::random_bn<T>(rng, out_ch);
  return m;
}

// One rep-conv position, either still in training form or already collapsed.
template <class T>
using RepConvSlot = std::variant<RepConvTrain<T>, FusedConv<T>>;

template <class T>
bool slot_is_fused(const RepConvSlot<T>& s) {
  return std::holds_alternative<FusedConv<T>>(s);
}

template <class T>
int slot_in_ch(const RepConvSlot<T>& s) {
  return std::visit([](const auto& v) {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, FusedConv<T>>) return v.params.in_ch;
    else return v.in_ch;
  }, s);
}

template <class T>
int slot_out_ch(const RepConvSlot<T>& s) {
  return std::visit([](const auto& v) {
    if constexpr (std::is_same_v<std::decay_t<decltype(v)>, FusedConv<T>>) return v.params.out_ch;
    else return v.out_ch;
  }, s);
}

template <class T>
Tensor4<T> slot_forward(const RepConvSlot<T>& s, const Tensor4<T>& x) {
  return std::visit([&](const auto& v) { return v.forward(x); }, s);
}

template <class T>
RepConvSlot<T> fuse_slot(const RepConvSlot<T>& s) {
  if (const auto* rc = std::get_if<RepConvTrain<T>>(&s)) return fuse_repconv(*rc);
  return s;
}

// Chain of rep convs with one residual shortcut spanning the whole chain.
template <class T>
struct BepUnit {
  std::vector<RepConvSlot<T>> convs;  // all in_ch == out_ch, stride 1
  bool shortcut = true;

  int channels() const { return convs.empty() ? 0 : slot_in_ch(convs.front()); }

  void validate() const {
    if (convs.empty()) fail(ErrorKind::Shape, "bep unit must contain at least one rep conv");
    const int ch = channels();
    for (const auto& s : convs)
      if (slot_in_ch(s) != ch || slot_out_ch(s) != ch)
        fail(ErrorKind::Shape, "bep unit convs must all be ", ch, " -> ", ch);
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    Tensor4<T> y = slot_forward(convs.front(), x);
    for (size_t i = 1; i < convs.size(); ++i) y = slot_forward(convs[i], y);
    return shortcut ? add(y, x) : y;
  }
};

// Stage body: a sequence of rep convs (v1 style) or of Bep units (v2 style).
// declared_depth records the pre-decomposition depth the builder was asked for.
template <class T>
struct RepBlock {
  std::variant<std::vector<RepConvSlot<T>>, std::vector<BepUnit<T>>> units;
  int declared_depth = 0;

  bool holds_bep_units() const {
    return std::holds_alternative<std::vector<BepUnit<T>>>(units);
  }

  int in_ch() const {
    if (holds_bep_units()) return std::get<1>(units).front().channels();
    return slot_in_ch(std::get<0>(units).front());
  }
  int out_ch() const {
    if (holds_bep_units()) return std::get<1>(units).back().channels();
    return slot_out_ch(std::get<0>(units).back());
  }

  void validate() const {
    if (holds_bep_units()) {
      const auto& us = std::get<1>(units);
      if (us.empty()) fail(ErrorKind::Shape, "rep block must be non-empty");
      for (const auto& u : us) u.validate();
    } else {
      const auto& cs = std::get<0>(units);
      if (cs.empty()) fail(ErrorKind::Shape, "rep block must be non-empty");
    }
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    if (holds_bep_units()) {
      const auto& us = std::get<1>(units);
      Tensor4<T> y = us.front().forward(x);
      for (size_t i = 1; i < us.size(); ++i) y = us[i].forward(y);
      return y;
    }
    const auto& cs = std::get<0>(units);
    Tensor4<T> y = slot_forward(cs.front(), x);
    for (size_t i = 1; i < cs.size(); ++i) y = slot_forward(cs[i], y);
    return y;
  }
};

// Hidden width of a CSP branch: round(out_ch * e) half away from zero,
// floored at 1.
inline int bepc3_hidden_width(int out_ch, double partial_ratio) {
  const long long r = std::llround(static_cast<double>(out_ch) * partial_ratio);
  return static_cast<int>(std::max<long long>(1, r));
}

// CSP-style block: two parallel 1x1 projections of the full input, a RepBlock
// of Bep units on one branch, channel concat (inner branch first), 1x1 merge.
template <class T>
struct BepC3 {
  int in_channels = 0, out_channels = 0;
  double partial_ratio = 0.5;
  ConvModule<T> split_a, split_b;  // 1x1, in -> hidden
  RepBlock<T> inner;               // hidden -> hidden
  ConvModule<T> merge;             // 1x1, 2*hidden -> out

  int hidden_width() const { return bepc3_hidden_width(out_channels, partial_ratio); }

  void validate() const {
    if (partial_ratio <= 0.0 || partial_ratio >= 1.0)
      fail(ErrorKind::Shape, "bepc3 partial ratio must be in (0,1), got ", partial_ratio);
    const int hidden = hidden_width();
    split_a.validate();
    split_b.validate();
    inner.validate();
    merge.validate();
    if (split_a.in_ch() != in_channels || split_b.in_ch() != in_channels)
      fail(ErrorKind::Shape, "bepc3 split convs must read ", in_channels, " channels");
    if (split_a.out_ch() != hidden || split_b.out_ch() != hidden)
      fail(ErrorKind::Shape, "bepc3 split convs must emit hidden width ", hidden);
    if (inner.in_ch() != hidden || inner.out_ch() != hidden)
      fail(ErrorKind::Shape, "bepc3 inner block must be ", hidden, " -> ", hidden);
    if (merge.in_ch() != 2 * hidden)
      fail(ErrorKind::Shape, "bepc3 merge must read ", 2 * hidden, " channels, got ",
           merge.in_ch());
    if (merge.out_ch() != out_channels)
      fail(ErrorKind::Shape, "bepc3 merge must emit ", out_channels, " channels");
  }

  Tensor4<T> forward(const Tensor4<T>& x) const {
    if (x.c != in_channels)
      fail(ErrorKind::Shape, "bepc3 forward: input channels (", x.c, ") != in_channels (",
           in_channels, ")");
    Tensor4<T> a = inner.forward(split_a.forward(x));
    Tensor4<T> b = split_b.forward(x);
    return merge.forward(concat_channels(a, b));
  }
};

// Any block that can sit at a graph position.
template <class T>
using BlockNode =
    std::variant<RepConvTrain<T>, FusedConv<T>, ConvModule<T>, BepUnit<T>, RepBlock<T>, BepC3<T>>;

namespace detail {

template <class T>
void fuse_in_place(RepConvSlot<T>& s) { s = fuse_slot(s); }

template <class T>
void fuse_in_place(BepUnit<T>& u) {
  for (auto& s : u.convs) fuse_in_place(s);
}

template <class T>
void fuse_in_place(RepBlock<T>& b) {
  if (b.holds_bep_units())
    for (auto& u : std::get<1>(b.units)) fuse_in_place(u);
  else
    for (auto& s : std::get<0>(b.units)) fuse_in_place(s);
}

template <class T>
void fuse_in_place(BepC3<T>& b) { fuse_in_place(b.inner); }

}  // namespace detail

// Recursively replace every training-form rep conv by its fused equivalent;
// topology (shortcuts, splits, concats) is untouched.
template <class T>
BlockNode<T> fuse_block(BlockNode<T> node) {
  std::visit([](auto& v) {
    using V = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<V, RepConvTrain<T>>) {
      // handled below; variant alternative must be replaced, not mutated
    } else if constexpr (std::is_same_v<V, BepUnit<T>> || std::is_same_v<V, RepBlock<T>> ||
                         std::is_same_v<V, BepC3<T>>) {
      detail::fuse_in_place(v);
    }
  }, node);
  if (const auto* rc = std::get_if<RepConvTrain<T>>(&node)) return fuse_repconv(*rc);
  return node;
}

template <class T>
Tensor4<T> block_forward(const BlockNode<T>& node, const Tensor4<T>& x) {
  return std::visit([&](const auto& v) { return v.forward(x); }, node);
}

// ---- parameter accounting -------------------------------------------------
// BN contributes gamma/beta/mean/var (4 per channel); eps is configuration,
// not a parameter.

template <class T>
uint64_t param_count(const ConvParams<T>& p) {
  return p.weight.size() + p.bias.size();
}

template <class T>
uint64_t param_count(const BatchNormParams<T>& p) {
  return 4ull * p.ch;
}

template <class T>
uint64_t param_count(const RepConvTrain<T>& rc) {
  uint64_t n = param_count(rc.branch3x3.conv) + param_count(rc.branch3x3.bn) +
               param_count(rc.branch1x1.conv) + param_count(rc.branch1x1.bn);
  if (rc.has_identity()) n += param_count(*rc.identity_bn);
  return n;
}

template <class T>
uint64_t param_count(const FusedConv<T>& fc) { return param_count(fc.params); }

template <class T>
uint64_t param_count(const ConvModule<T>& m) { return param_count(m.conv) + param_count(m.bn); }

template <class T>
uint64_t param_count(const RepConvSlot<T>& s) {
  return std::visit([](const auto& v) { return param_count(v); }, s);
}

template <class T>
uint64_t param_count(const BepUnit<T>& u) {
  uint64_t n = 0;
  for (const auto& s : u.convs) n += param_count(s);
  return n;
}

template <class T>
uint64_t param_count(const RepBlock<T>& b) {
  uint64_t n = 0;
  if (b.holds_bep_units())
    for (const auto& u : std::get<1>(b.units)) n += param_count(u);
  else
    for (const auto& s : std::get<0>(b.units)) n += param_count(s);
  return n;
}

template <class T>
uint64_t param_count(const BepC3<T>& b) {
  return param_count(b.split_a) + param_count(b.split_b) + param_count(b.inner) +
         param_count(b.merge);
}

template <class T>
uint64_t param_count(const BlockNode<T>& node) {
  return std::visit([](const auto& v) { return param_count(v); }, node);
}

// Parameters a single rep conv sheds when fused: the 1x1 kernel plus all BN
// arrays, minus the bias the fused conv gains.
template <class T>
uint64_t repconv_fusion_saving(const RepConvTrain<T>& rc) {
  const uint64_t bn_mass = 4ull * rc.out_ch * (rc.has_identity() ? 3 : 2);
  const uint64_t one_by_one = static_cast<uint64_t>(rc.out_ch) * rc.in_ch;
  return one_by_one + bn_mass - static_cast<uint64_t>(rc.out_ch);
}

}  // namespace repnet
