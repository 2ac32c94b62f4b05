#pragma once

#include <optional>

#include "graph.hpp"

namespace repnet {

enum class Variant { N, S, M, L };
enum class Version { V1, V2 };

// Stage body realization. Auto picks the family default: v1 and v2-n/s use
// pure rep-conv chains, v2-m/l use BepC3 blocks.
enum class BodyStyle { Auto, PureRep, Csp };

const char* variant_name(Variant v);
const char* version_name(Version v);

struct VariantRow {
  Variant variant;
  Version version;
  double depth_multiplier;
  double width_multiplier;
};

// The supported named variants: n/s in v1, n/s/m/l in v2.
const std::vector<VariantRow>& variant_table();

struct ModelSpec {
  Variant variant = Variant::N;
  Version version = Version::V1;
  double depth_multiplier = 0.33;
  double width_multiplier = 0.25;
  std::optional<double> partial_ratio;  // only meaningful for CSP bodies
  int input_channels = 3;
  BodyStyle structure = BodyStyle::Auto;

  static ModelSpec named(Variant v, Version ver);
  // Parses and validates the documented JSON schema; throws ErrorKind::Spec.
  static ModelSpec parse_json(const std::string& json_text);
  std::string to_json() const;

  std::string name() const;  // e.g. "yolov6n-v1"
  bool csp_bodies() const;
  double resolved_partial_ratio() const;  // 2/3 for m, 1/2 otherwise
  void validate() const;
};

// Base stage settings shared by both versions.
inline constexpr int kBackboneBaseDepths[5] = {1, 6, 12, 18, 6};
inline constexpr int kBackboneBaseWidths[5] = {64, 128, 256, 512, 1024};
inline constexpr int kNeckBaseDepths[4] = {12, 12, 12, 12};
// Slot order: lateral-P5, lateral-P4, out-P3, downsample-P3->P4, out-P4, out-P5.
inline constexpr int kNeckBaseWidths[6] = {256, 128, 128, 256, 256, 512};

// max(round(base * m), 1), rounding half away from zero.
int scale_depth(int base, double multiplier);

// base * m snapped to the nearest multiple of divisor, floored at divisor.
int scale_width(int base, double multiplier, int divisor = 8);

// Declared block depth -> number of Bep units (2 rep convs each, minimum 1).
int bep_unit_count(int declared_depth);

struct ScaledShape {
  std::vector<int> backbone_repeats;  // 5 entries, [0] is the stem
  std::vector<int> backbone_widths;   // 5
  std::vector<int> neck_depths;       // 4
  std::vector<int> neck_widths;       // 6
};
ScaledShape scaled_shape(const ModelSpec& spec);

namespace detail {

template <class T>
RepBlock<T> make_rep_body(SplitMix64& rng, int in_ch, int out_ch, int depth) {
  std::vector<RepConvSlot<T>> convs;
  convs.reserve(depth);
  convs.emplace_back(random_repconv<T>(rng, in_ch, out_ch, 1));
  for (int i = 1; i < depth; ++i)
    convs.emplace_back(random_repconv<T>(rng, out_ch, out_ch, 1));
  return RepBlock<T>{std::move(convs), depth};
}

template <class T>
RepBlock<T> make_bep_body(SplitMix64& rng, int ch, int declared_depth) {
  // Units are residual; damp the chain so dozens of stacked shortcuts keep
  // activations O(1).
  constexpr double kUnitGain = 0.4;
  std::vector<BepUnit<T>> units;
  const int n_units = bep_unit_count(declared_depth);
  units.reserve(n_units);
  for (int u = 0; u < n_units; ++u) {
    BepUnit<T> unit;
    unit.shortcut = true;
    unit.convs.emplace_back(random_repconv<T>(rng, ch, ch, 1, Activation::Relu, kUnitGain));
    unit.convs.emplace_back(random_repconv<T>(rng, ch, ch, 1, Activation::Relu, kUnitGain));
    units.push_back(std::move(unit));
  }
  return RepBlock<T>{std::move(units), declared_depth};
}

template <class T>
BepC3<T> make_bepc3(SplitMix64& rng, int in_ch, int out_ch, double e, int declared_depth) {
  BepC3<T> b;
  b.in_channels = in_ch;
  b.out_channels = out_ch;
  b.partial_ratio = e;
  const int hidden = b.hidden_width();
  b.split_a = random_conv_module<T>(rng, in_ch, hidden, 1, 1);
  b.split_b = random_conv_module<T>(rng, in_ch, hidden, 1, 1);
  b.inner = make_bep_body<T>(rng, hidden, declared_depth);
  b.merge = random_conv_module<T>(rng, 2 * hidden, out_ch, 1, 1);
  return b;
}

// Stage/neck body at the style the model spec resolves to.
template <class T>
typename GraphNode<T>::Op make_body(SplitMix64& rng, const ModelSpec& spec, int in_ch, int out_ch,
                                    int depth) {
  if (spec.csp_bodies())
    return make_bepc3<T>(rng, in_ch, out_ch, spec.resolved_partial_ratio(), depth);
  return make_rep_body<T>(rng, in_ch, out_ch, depth);
}

// Appends the five backbone stages; returns the P3/P4/P5 tap node ids.
template <class T>
std::array<int, 3> append_backbone(NetworkGraph<T>& g, const ModelSpec& spec, SplitMix64& rng,
                                   int input_ref) {
  const ScaledShape s = scaled_shape(spec);
  const auto& w = s.backbone_widths;
  int prev = g.add_node("backbone.stem", random_repconv<T>(rng, spec.input_channels, w[0], 2),
                        {input_ref}, spec.input_channels, w[0]);
  std::array<int, 3> taps{-1, -1, -1};
  for (int i = 1; i <= 4; ++i) {
    const std::string stage = "backbone.stage" + std::to_string(i);
    prev = g.add_node(stage + ".trans", random_repconv<T>(rng, w[i - 1], w[i], 2), {prev},
                      w[i - 1], w[i]);
    prev = g.add_node(stage + ".body",
                      make_body<T>(rng, spec, w[i], w[i], s.backbone_repeats[i]), {prev}, w[i],
                      w[i]);
    if (i >= 2) taps[i - 2] = prev;
  }
  return taps;
}

// Appends the PAN neck onto P3/P4/P5 producers: two top-down merges
// (1x1 lateral, 2x upsample, concat, body) then two bottom-up merges
// (3x3 stride-2 conv, concat with the lateral output, body).
template <class T>
std::array<int, 3> append_neck(NetworkGraph<T>& g, const ModelSpec& spec, SplitMix64& rng,
                               const std::array<int, 3>& src) {
  const ScaledShape s = scaled_shape(spec);
  const auto& nw = s.neck_widths;
  const auto& nd = s.neck_depths;
  const int c_p3 = g.ref_channels(src[0]);
  const int c_p4 = g.ref_channels(src[1]);
  const int c_p5 = g.ref_channels(src[2]);

  const int lat_p5 = g.add_node("neck.lat_p5", random_conv_module<T>(rng, c_p5, nw[0], 1, 1),
                                {src[2]}, c_p5, nw[0]);
  const int up_p5 = g.add_node("neck.up_p5", Upsample2x{}, {lat_p5}, nw[0], nw[0]);
  const int cat_p4 = g.add_node("neck.cat_p4", Concat2{}, {up_p5, src[1]}, nw[0] + c_p4,
                                nw[0] + c_p4);
  const int td_p4 = g.add_node("neck.td_p4",
                               make_body<T>(rng, spec, nw[0] + c_p4, nw[0], nd[0]), {cat_p4},
                               nw[0] + c_p4, nw[0]);

  const int lat_p4 = g.add_node("neck.lat_p4", random_conv_module<T>(rng, nw[0], nw[1], 1, 1),
                                {td_p4}, nw[0], nw[1]);
  const int up_p4 = g.add_node("neck.up_p4", Upsample2x{}, {lat_p4}, nw[1], nw[1]);
  const int cat_p3 = g.add_node("neck.cat_p3", Concat2{}, {up_p4, src[0]}, nw[1] + c_p3,
                                nw[1] + c_p3);
  const int td_p3 = g.add_node("neck.td_p3",
                               make_body<T>(rng, spec, nw[1] + c_p3, nw[2], nd[1]), {cat_p3},
                               nw[1] + c_p3, nw[2]);

  const int down_p3 = g.add_node("neck.down_p3", random_conv_module<T>(rng, nw[2], nw[3], 3, 2),
                                 {td_p3}, nw[2], nw[3]);
  const int cat_n4 = g.add_node("neck.cat_n4", Concat2{}, {down_p3, lat_p4}, nw[3] + nw[1],
                                nw[3] + nw[1]);
  const int bu_p4 = g.add_node("neck.bu_p4",
                               make_body<T>(rng, spec, nw[3] + nw[1], nw[4], nd[2]), {cat_n4},
                               nw[3] + nw[1], nw[4]);

  const int down_p4 = g.add_node("neck.down_p4", random_conv_module<T>(rng, nw[4], nw[4], 3, 2),
                                 {bu_p4}, nw[4], nw[4]);
  const int cat_n5 = g.add_node("neck.cat_n5", Concat2{}, {down_p4, lat_p5}, nw[4] + nw[0],
                                nw[4] + nw[0]);
  const int bu_p5 = g.add_node("neck.bu_p5",
                               make_body<T>(rng, spec, nw[4] + nw[0], nw[5], nd[3]), {cat_n5},
                               nw[4] + nw[0], nw[5]);

  return {td_p3, bu_p4, bu_p5};
}

}  // namespace detail

template <class T>
NetworkGraph<T> build_backbone(const ModelSpec& spec, SplitMix64& rng) {
  spec.validate();
  NetworkGraph<T> g;
  g.input_channels = {spec.input_channels};
  g.taps = detail::append_backbone(g, spec, rng, -1);
  g.validate();
  return g;
}

// Standalone neck: three graph inputs carrying the scaled backbone tap widths.
template <class T>
NetworkGraph<T> build_neck(const ModelSpec& spec, SplitMix64& rng) {
  spec.validate();
  const ScaledShape s = scaled_shape(spec);
  NetworkGraph<T> g;
  g.input_channels = {s.backbone_widths[2], s.backbone_widths[3], s.backbone_widths[4]};
  g.taps = detail::append_neck(g, spec, rng, {-1, -2, -3});
  g.validate();
  return g;
}

template <class T>
NetworkGraph<T> build_model(const ModelSpec& spec, SplitMix64& rng) {
  spec.validate();
  NetworkGraph<T> g;
  g.input_channels = {spec.input_channels};
  const std::array<int, 3> backbone_taps = detail::append_backbone(g, spec, rng, -1);
  g.taps = detail::append_neck(g, spec, rng, backbone_taps);
  g.validate();
  return g;
}

}  // namespace repnet
