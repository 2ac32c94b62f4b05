#include "model.hpp"

#include <json.hpp>

namespace repnet {

using json = nlohmann::json;

Model Model::build(const ModelSpec& spec, Precision precision, uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  m.precision_ = precision;
  SplitMix64 rng(seed);
  if (precision == Precision::F32)
    m.graph_ = build_model<float>(spec, rng);
  else
    m.graph_ = build_model<double>(spec, rng);
  return m;
}

Model Model::load(const ModelSpec& spec, const std::string& weights_path) {
  spec.validate();
  const WeightFileData file = read_weight_file(weights_path);
  Model m;
  m.spec_ = spec;
  m.precision_ = file.precision;
  SplitMix64 rng(0);  // skeleton values are fully overwritten by the file
  auto fill = [&](auto tag) {
    using T = decltype(tag);
    NetworkGraph<T> g = build_model<T>(spec, rng);
    if (file.is_fused()) g = fuse_graph(g);
    import_weights_into(g, file);
    m.graph_ = std::move(g);
  };
  if (file.precision == Precision::F32)
    fill(float{});
  else
    fill(double{});
  return m;
}

bool Model::fused() const {
  return std::visit([](const auto& g) { return g.mode == GraphMode::Fused; }, graph_);
}

uint64_t Model::param_count() const {
  return std::visit([](const auto& g) { return graph_param_count(g); }, graph_);
}

void Model::save(const std::string& path) const {
  std::visit([&](const auto& g) { export_weights(g, path); }, graph_);
}

void Model::fuse() {
  std::visit([&](auto& g) { g = fuse_graph(g); }, graph_);
}

void Model::output_shape(int tap, int n, int h, int w, int dims_out[4]) const {
  if (tap < 0 || tap > 2) fail(ErrorKind::InvalidArgument, "tap index must be 0..2, got ", tap);
  if (h % 32 != 0 || w % 32 != 0)
    fail(ErrorKind::Shape, "input spatial dims ", h, "x", w, " must be divisible by 32");
  const int stride = 8 << tap;
  dims_out[0] = n;
  dims_out[1] = std::visit([&](const auto& g) { return g.nodes[g.taps[tap]].out_ch; }, graph_);
  dims_out[2] = h / stride;
  dims_out[3] = w / stride;
}

void Model::forward(const double* input, int n, int c, int h, int w, double* p3, double* p4,
                    double* p5) const {
  if (!input || !p3 || !p4 || !p5)
    fail(ErrorKind::InvalidArgument, "forward requires non-null input and output buffers");
  std::visit([&](const auto& g) {
    using T = typename std::decay_t<decltype(g)>::value_type;
    Tensor4<T> x(n, c, h, w);
    const size_t total = x.size();
    for (size_t i = 0; i < total; ++i) x.data[i] = static_cast<T>(input[i]);
    const auto outs = g.forward(x);
    double* dst[3] = {p3, p4, p5};
    for (int t = 0; t < 3; ++t)
      for (size_t i = 0; i < outs[t].size(); ++i) dst[t][i] = static_cast<double>(outs[t].data[i]);
  }, graph_);
}

VerificationReport Model::verify(int trials, int h, int w, double tolerance, uint64_t seed) const {
  if (fused())
    fail(ErrorKind::State, "verification needs a training-form model; this one is already fused");
  if (trials < 1) fail(ErrorKind::InvalidArgument, "verification trials must be >= 1");
  return std::visit([&](const auto& g) {
    using T = typename std::decay_t<decltype(g)>::value_type;
    const NetworkGraph<T> fused_g = fuse_graph(g);
    SplitMix64 rng(seed);
    double dev = 0.0;
    for (int t = 0; t < trials; ++t) {
      Tensor4<T> x = random_tensor<T>(rng, 1, g.input_channels.front(), h, w);
      const auto a = g.forward(x);
      const auto b = fused_g.forward(x);
      for (int i = 0; i < 3; ++i) dev = std::max(dev, max_abs_diff(a[i], b[i]));
    }
    return VerificationReport{trials, dev, tolerance, dev <= tolerance, seed};
  }, graph_);
}

AnalysisReport Model::analyze(const InputDims& input, const HardwareProfile& hw) const {
  if (input.h % 32 != 0 || input.w % 32 != 0)
    fail(ErrorKind::Shape, "analysis input dims ", input.h, "x", input.w,
         " must be divisible by 32");
  std::string label = spec_.name();
  if (spec_.structure != BodyStyle::Auto)
    label += spec_.structure == BodyStyle::PureRep ? " (rep bodies)" : " (bepc3 bodies)";
  return std::visit([&](const auto& g) { return analyze_model(g, input, hw, label); }, graph_);
}

std::string Model::describe_json() const {
  const ScaledShape s = scaled_shape(spec_);
  json j;
  j["model"] = spec_.name();
  j["variant"] = variant_name(spec_.variant);
  j["version"] = version_name(spec_.version);
  j["depth_multiplier"] = spec_.depth_multiplier;
  j["width_multiplier"] = spec_.width_multiplier;
  j["structure"] = spec_.csp_bodies() ? "bepc3" : "rep";
  if (spec_.csp_bodies()) j["partial_ratio"] = spec_.resolved_partial_ratio();
  j["input_channels"] = spec_.input_channels;
  j["precision"] = precision_name(precision_);
  j["mode"] = fused() ? "fused" : "train_form";
  j["backbone"] = {{"repeats", s.backbone_repeats}, {"widths", s.backbone_widths}};
  j["neck"] = {{"depths", s.neck_depths}, {"widths", s.neck_widths}};
  j["param_count"] = param_count();

  std::visit([&](const auto& g) {
    using T = typename std::decay_t<decltype(g)>::value_type;
    static_cast<void>(sizeof(T));
    j["taps"] = json::array();
    const char* tap_names[3] = {"P3", "P4", "P5"};
    for (int t = 0; t < 3; ++t)
      j["taps"].push_back({{"name", tap_names[t]},
                           {"channels", g.nodes[g.taps[t]].out_ch},
                           {"stride", 8 << t}});
    j["nodes"] = json::array();
    for (const auto& nd : g.nodes)
      j["nodes"].push_back({{"name", nd.name},
                            {"kind", node_kind<T>(nd.op)},
                            {"in_channels", nd.in_ch},
                            {"out_channels", nd.out_ch}});
  }, graph_);
  return j.dump(2);
}

}  // namespace repnet
