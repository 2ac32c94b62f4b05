#pragma once

#include "graph.hpp"

namespace repnet {

struct HardwareProfile {
  double peak_flops = 0.0;     // FLOP/s
  double mem_bandwidth = 0.0;  // bytes/s
  std::string name = "hw";

  void validate() const {
    if (!(peak_flops > 0.0) || !(mem_bandwidth > 0.0))
      fail(ErrorKind::InvalidArgument,
           "hardware profile requires positive peak compute and bandwidth");
  }
  // Arithmetic intensity at which the two roofline bounds meet.
  double ridge() const { return peak_flops / mem_bandwidth; }
};

enum class Bound { Memory, Compute };

inline const char* bound_name(Bound b) { return b == Bound::Memory ? "memory" : "compute"; }

// FLOPs use the 2*MAC convention with bias excluded; bytes_moved charges
// weights + input + output once each (no cache modeling).
struct LayerReport {
  std::string name;
  std::string kind;
  uint64_t params = 0;
  uint64_t flops = 0;
  uint64_t bytes_moved = 0;
  double arithmetic_intensity = 0.0;
  double attainable = 0.0;  // FLOP/s
  Bound bound = Bound::Compute;
};

// attainable = min(peak, bandwidth * intensity); a layer is memory-bound
// strictly below the ridge point (ties classify as compute-bound).
inline void apply_roofline(LayerReport& l, const HardwareProfile& hw) {
  hw.validate();
  l.arithmetic_intensity =
      l.bytes_moved == 0 ? 0.0 : static_cast<double>(l.flops) / static_cast<double>(l.bytes_moved);
  const double mem_bound = hw.mem_bandwidth * l.arithmetic_intensity;
  l.attainable = std::min(hw.peak_flops, mem_bound);
  l.bound = mem_bound < hw.peak_flops ? Bound::Memory : Bound::Compute;
}

struct InputDims {
  int n = 1, c = 3, h = 64, w = 64;
};

struct ReportTotals {
  uint64_t params = 0;
  uint64_t flops = 0;
  uint64_t bytes_moved = 0;
  uint64_t layers = 0;
  uint64_t memory_bound_layers = 0;
  double memory_bound_flops_fraction = 0.0;
};

struct AnalysisReport {
  std::string model;
  std::string mode;
  Precision precision = Precision::F64;
  InputDims input;
  HardwareProfile hw;
  std::vector<LayerReport> layers;
  ReportTotals totals;
};

std::string report_json(const AnalysisReport& r);
std::string report_table(const AnalysisReport& r);

namespace detail {

struct LayerEmitter {
  int batch;
  int ebytes;
  std::vector<LayerReport>* out;

  static uint64_t elems(int batch, int c, int h, int w) {
    return static_cast<uint64_t>(batch) * c * static_cast<uint64_t>(h) * w;
  }

  void conv(const std::string& name, int in_c, int out_c, int k, int h_in, int w_in, int oh,
            int ow) {
    LayerReport l;
    l.name = name;
    l.kind = "conv";
    l.params = static_cast<uint64_t>(out_c) * in_c * k * k + out_c;  // bias slot counted if present by caller
    l.flops = 2ull * k * k * in_c * out_c * elems(batch, 1, oh, ow);
    l.bytes_moved =
        (l.params + elems(batch, in_c, h_in, w_in) + elems(batch, out_c, oh, ow)) * ebytes;
    out->push_back(std::move(l));
  }

  void conv_no_bias(const std::string& name, int in_c, int out_c, int k, int h_in, int w_in,
                    int oh, int ow) {
    conv(name, in_c, out_c, k, h_in, w_in, oh, ow);
    out->back().params -= out_c;
    out->back().bytes_moved -= static_cast<uint64_t>(out_c) * ebytes;
  }

  void bn(const std::string& name, int c, int h, int w) {
    LayerReport l;
    l.name = name;
    l.kind = "batchnorm";
    l.params = 4ull * c;
    l.flops = 2ull * elems(batch, c, h, w);
    l.bytes_moved = (l.params + 2ull * elems(batch, c, h, w)) * ebytes;
    out->push_back(std::move(l));
  }

  void eltwise(const std::string& name, const char* kind, int n_in, uint64_t flops_per_elem,
               int c, int h, int w) {
    LayerReport l;
    l.name = name;
    l.kind = kind;
    l.flops = flops_per_elem * elems(batch, c, h, w);
    l.bytes_moved = static_cast<uint64_t>(n_in + 1) * elems(batch, c, h, w) * ebytes;
    out->push_back(std::move(l));
  }

  void upsample(const std::string& name, int c, int h, int w) {
    LayerReport l;
    l.name = name;
    l.kind = "upsample2x";
    l.bytes_moved = (elems(batch, c, h, w) + elems(batch, c, 2 * h, 2 * w)) * ebytes;
    out->push_back(std::move(l));
  }

  void concat(const std::string& name, int c_a, int c_b, int h, int w) {
    LayerReport l;
    l.name = name;
    l.kind = "concat";
    l.bytes_moved = 2ull * elems(batch, c_a + c_b, h, w) * ebytes;
    out->push_back(std::move(l));
  }
};

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const RepConvTrain<T>& rc, int h,
                 int w, int& oh, int& ow) {
  oh = conv_out_dim(h, 3, rc.stride, 1);
  ow = conv_out_dim(w, 3, rc.stride, 1);
  e.conv_no_bias(name + ".branch3x3.conv", rc.in_ch, rc.out_ch, 3, h, w, oh, ow);
  e.bn(name + ".branch3x3.bn", rc.out_ch, oh, ow);
  e.conv_no_bias(name + ".branch1x1.conv", rc.in_ch, rc.out_ch, 1, h, w, oh, ow);
  e.bn(name + ".branch1x1.bn", rc.out_ch, oh, ow);
  if (rc.has_identity()) e.bn(name + ".identity.bn", rc.out_ch, oh, ow);
  e.eltwise(name + ".add0", "add", 2, 1, rc.out_ch, oh, ow);
  if (rc.has_identity()) e.eltwise(name + ".add1", "add", 2, 1, rc.out_ch, oh, ow);
  if (rc.activation == Activation::Relu) e.eltwise(name + ".relu", "relu", 1, 1, rc.out_ch, oh, ow);
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const FusedConv<T>& fc, int h, int w,
                 int& oh, int& ow) {
  const auto& p = fc.params;
  oh = conv_out_dim(h, p.k, p.stride, p.padding);
  ow = conv_out_dim(w, p.k, p.stride, p.padding);
  e.conv(name + ".fused.conv", p.in_ch, p.out_ch, p.k, h, w, oh, ow);
  if (fc.activation == Activation::Relu)
    e.eltwise(name + ".relu", "relu", 1, 1, p.out_ch, oh, ow);
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const ConvModule<T>& m, int h, int w,
                 int& oh, int& ow) {
  const auto& p = m.conv;
  oh = conv_out_dim(h, p.k, p.stride, p.padding);
  ow = conv_out_dim(w, p.k, p.stride, p.padding);
  e.conv_no_bias(name + ".conv", p.in_ch, p.out_ch, p.k, h, w, oh, ow);
  e.bn(name + ".bn", p.out_ch, oh, ow);
  if (m.activation == Activation::Relu) e.eltwise(name + ".relu", "relu", 1, 1, p.out_ch, oh, ow);
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const RepConvSlot<T>& s, int h, int w,
                 int& oh, int& ow) {
  std::visit([&](const auto& v) { emit_layers(e, name, v, h, w, oh, ow); }, s);
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const BepUnit<T>& u, int h, int w,
                 int& oh, int& ow) {
  oh = h;
  ow = w;
  for (size_t i = 0; i < u.convs.size(); ++i)
    emit_layers(e, name + ".conv" + std::to_string(i), u.convs[i], h, w, oh, ow);
  if (u.shortcut) e.eltwise(name + ".add", "add", 2, 1, u.channels(), h, w);
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const RepBlock<T>& b, int h, int w,
                 int& oh, int& ow) {
  oh = h;
  ow = w;
  if (b.holds_bep_units()) {
    const auto& us = std::get<1>(b.units);
    for (size_t i = 0; i < us.size(); ++i)
      emit_layers(e, name + ".unit" + std::to_string(i), us[i], h, w, oh, ow);
  } else {
    const auto& cs = std::get<0>(b.units);
    for (size_t i = 0; i < cs.size(); ++i)
      emit_layers(e, name + ".conv" + std::to_string(i), cs[i], h, w, oh, ow);
  }
}

template <class T>
void emit_layers(LayerEmitter& e, const std::string& name, const BepC3<T>& b, int h, int w,
                 int& oh, int& ow) {
  oh = h;
  ow = w;
  int th = h, tw = w;
  emit_layers(e, name + ".split_a", b.split_a, h, w, th, tw);
  emit_layers(e, name + ".inner", b.inner, h, w, th, tw);
  emit_layers(e, name + ".split_b", b.split_b, h, w, th, tw);
  e.concat(name + ".concat", b.hidden_width(), b.hidden_width(), h, w);
  emit_layers(e, name + ".merge", b.merge, h, w, th, tw);
}

}  // namespace detail

// Primitive-layer expansion of the whole graph at the given input size, in
// execution order. For multi-input (neck-only) graphs, input i runs at
// (h >> i, w >> i), matching the P3/P4/P5 stride relation.
template <class T>
std::vector<LayerReport> graph_layers(const NetworkGraph<T>& g, int batch, int h, int w,
                                      Precision prec) {
  std::vector<LayerReport> layers;
  detail::LayerEmitter e{batch, element_bytes(prec), &layers};
  std::vector<std::pair<int, int>> dims(g.nodes.size());
  auto in_dims = [&](int ref) -> std::pair<int, int> {
    if (ref >= 0) return dims[ref];
    const int shift = -ref - 1;
    return {h >> shift, w >> shift};
  };
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& nd = g.nodes[i];
    const std::pair<int, int> d = in_dims(nd.inputs[0]);
    const int ih = d.first, iw = d.second;
    int oh = ih, ow = iw;
    std::visit([&](const auto& v) {
      using V = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<V, Upsample2x>) {
        e.upsample(nd.name, nd.in_ch, ih, iw);
        oh = 2 * ih;
        ow = 2 * iw;
      } else if constexpr (std::is_same_v<V, Concat2>) {
        e.concat(nd.name, g.ref_channels(nd.inputs[0]), g.ref_channels(nd.inputs[1]), ih, iw);
      } else {
        detail::emit_layers(e, nd.name, v, ih, iw, oh, ow);
      }
    }, nd.op);
    dims[i] = {oh, ow};
  }
  return layers;
}

template <class T>
uint64_t count_params(const NetworkGraph<T>& g) {
  return graph_param_count(g);
}

template <class T>
uint64_t count_flops(const NetworkGraph<T>& g, int batch, int h, int w) {
  uint64_t total = 0;
  for (const auto& l : graph_layers(g, batch, h, w, Precision::F32)) total += l.flops;
  return total;
}

template <class T>
AnalysisReport analyze_model(const NetworkGraph<T>& g, const InputDims& input,
                             const HardwareProfile& hw, const std::string& label = "") {
  hw.validate();
  if (input.n < 1 || input.h < 1 || input.w < 1)
    fail(ErrorKind::InvalidArgument, "analysis input dims must be >= 1, got ", input.n, "x?x",
         input.h, "x", input.w);
  AnalysisReport r;
  r.model = label;
  r.mode = graph_mode_name(g.mode);
  r.precision = std::is_same_v<T, float> ? Precision::F32 : Precision::F64;
  r.input = input;
  r.input.c = g.input_channels.front();
  r.hw = hw;
  r.layers = graph_layers(g, input.n, input.h, input.w, r.precision);

  uint64_t mem_flops = 0;
  for (auto& l : r.layers) {
    apply_roofline(l, hw);
    r.totals.params += l.params;
    r.totals.flops += l.flops;
    r.totals.bytes_moved += l.bytes_moved;
    if (l.bound == Bound::Memory) {
      ++r.totals.memory_bound_layers;
      mem_flops += l.flops;
    }
  }
  r.totals.layers = r.layers.size();
  r.totals.memory_bound_flops_fraction =
      r.totals.flops == 0 ? 0.0 : static_cast<double>(mem_flops) / static_cast<double>(r.totals.flops);
  return r;
}

}  // namespace repnet
