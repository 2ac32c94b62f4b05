#include <doctest.h>

#include <thread>

#include "builder.hpp"
#include "test_support.hpp"

using namespace repnet;
using namespace repnet::test;

namespace {

template <class T>
int count_nodes_of(const NetworkGraph<T>& g, size_t variant_index) {
  int n = 0;
  for (const auto& nd : g.nodes)
    if (nd.op.index() == variant_index) ++n;
  return n;
}

template <class T>
int count_bepc3(const NetworkGraph<T>& g) { return count_nodes_of(g, 4); }

template <class T>
int count_rep_blocks(const NetworkGraph<T>& g) { return count_nodes_of(g, 3); }

template <class T>
std::vector<double> bepc3_ratios(const NetworkGraph<T>& g) {
  std::vector<double> r;
  for (const auto& nd : g.nodes)
    if (const auto* b = std::get_if<BepC3<T>>(&nd.op)) r.push_back(b->partial_ratio);
  return r;
}

template <class T>
std::vector<int> body_depths(const NetworkGraph<T>& g, const std::string& prefix) {
  std::vector<int> out;
  for (const auto& nd : g.nodes) {
    if (nd.name.rfind(prefix, 0) != 0) continue;
    if (const auto* rb = std::get_if<RepBlock<T>>(&nd.op)) out.push_back(rb->declared_depth);
    if (const auto* c3 = std::get_if<BepC3<T>>(&nd.op)) out.push_back(c3->inner.declared_depth);
  }
  return out;
}

}  // namespace

TEST_CASE("scale_depth applies round-half-away-from-zero with a floor of 1") {
  CHECK(scale_depth(6, 0.33) == 2);
  CHECK(scale_depth(12, 0.33) == 4);
  CHECK(scale_depth(18, 0.33) == 6);
  CHECK(scale_depth(18, 1.0) == 18);
  CHECK(scale_depth(1, 0.33) == 1);
  CHECK(scale_depth(6, 0.6) == 4);
  CHECK(scale_depth(18, 0.6) == 11);
  CHECK(scale_depth(5, 0.5) == 3);  // 2.5 rounds away from zero
}

TEST_CASE("scale_depth is monotone in both arguments") {
  const double mults[] = {0.2, 0.33, 0.5, 0.6, 0.75, 1.0, 1.25};
  for (double m : mults)
    for (int base = 1; base < 24; ++base)
      CHECK(scale_depth(base + 1, m) >= scale_depth(base, m));
  for (int base = 1; base < 24; ++base)
    for (size_t i = 1; i < std::size(mults); ++i)
      CHECK(scale_depth(base, mults[i]) >= scale_depth(base, mults[i - 1]));
}

TEST_CASE("scale_width snaps to multiples of the divisor") {
  CHECK(scale_width(1024, 0.25) == 256);
  CHECK(scale_width(64, 1.0) == 64);
  CHECK(scale_width(256, 0.75) == 192);
  CHECK(scale_width(64, 0.25) == 16);
  CHECK(scale_width(8, 0.25) == 8);  // floor at the divisor

  SplitMix64 rng(70);
  for (int i = 0; i < 200; ++i) {
    const int base = rng.range_int(1, 2048);
    const double m = rng.range(0.1, 1.5);
    const int w = scale_width(base, m);
    CHECK(w % 8 == 0);
    CHECK(w >= 8);
  }
}

TEST_CASE("bep unit decomposition is round(depth/2) units of two convs") {
  CHECK(bep_unit_count(1) == 1);
  CHECK(bep_unit_count(2) == 1);
  CHECK(bep_unit_count(3) == 2);
  CHECK(bep_unit_count(4) == 2);
  CHECK(bep_unit_count(5) == 3);
  CHECK(bep_unit_count(7) == 4);
  CHECK(bep_unit_count(11) == 6);
  CHECK(bep_unit_count(12) == 6);
  CHECK(bep_unit_count(18) == 9);
}

TEST_CASE("yolov6n-v1 backbone has the documented repeats and widths") {
  const ModelSpec spec = ModelSpec::named(Variant::N, Version::V1);
  const ScaledShape s = scaled_shape(spec);
  CHECK(s.backbone_repeats == std::vector<int>{1, 2, 4, 6, 2});
  CHECK(s.backbone_widths == std::vector<int>{16, 32, 64, 128, 256});
  CHECK(s.neck_depths == std::vector<int>{4, 4, 4, 4});
  CHECK(s.neck_widths == std::vector<int>{64, 32, 32, 64, 64, 128});

  SplitMix64 rng(71);
  auto g = build_backbone<double>(spec, rng);
  g.validate();
  CHECK(body_depths(g, "backbone.") == std::vector<int>{2, 4, 6, 2});

  // rep-chain bodies actually hold that many convs
  for (const auto& nd : g.nodes)
    if (const auto* rb = std::get_if<RepBlock<double>>(&nd.op))
      CHECK(static_cast<int>(std::get<0>(rb->units).size()) == rb->declared_depth);
}

TEST_CASE("yolov6l-v2 backbone uses identity multipliers and bep units") {
  const ModelSpec spec = ModelSpec::named(Variant::L, Version::V2);
  const ScaledShape s = scaled_shape(spec);
  CHECK(s.backbone_repeats == std::vector<int>{1, 6, 12, 18, 6});
  CHECK(s.backbone_widths == std::vector<int>{64, 128, 256, 512, 1024});

  SplitMix64 rng(72);
  auto g = build_backbone<float>(spec, rng);
  const std::vector<int> expected_units{3, 6, 9, 3};
  size_t stage = 0;
  for (const auto& nd : g.nodes)
    if (const auto* c3 = std::get_if<BepC3<float>>(&nd.op)) {
      CHECK(c3->partial_ratio == 0.5);
      REQUIRE(c3->inner.holds_bep_units());
      const auto& units = std::get<1>(c3->inner.units);
      CHECK(static_cast<int>(units.size()) == expected_units[stage]);
      for (const auto& u : units) CHECK(u.convs.size() == 2);
      ++stage;
    }
  CHECK(stage == 4);
}

TEST_CASE("backbone taps land at strides 8, 16 and 32") {
  SplitMix64 rng(73);
  auto g = build_backbone<double>(ModelSpec::named(Variant::N, Version::V1), rng);
  auto x = random_tensor<double>(rng, 1, 3, 64, 64);
  auto taps = g.forward(x);
  CHECK(taps[0].c == 64);
  CHECK(taps[0].h == 8);
  CHECK(taps[1].c == 128);
  CHECK(taps[1].h == 4);
  CHECK(taps[2].c == 256);
  CHECK(taps[2].w == 2);
}

TEST_CASE("yolov6s-v1 neck blocks each carry depth 4") {
  const ModelSpec spec = ModelSpec::named(Variant::S, Version::V1);
  SplitMix64 rng(74);
  auto g = build_neck<double>(spec, rng);
  g.validate();
  CHECK(body_depths(g, "neck.") == std::vector<int>{4, 4, 4, 4});
}

TEST_CASE("yolov6l-v2 neck keeps base depths and widths") {
  const ModelSpec spec = ModelSpec::named(Variant::L, Version::V2);
  const ScaledShape s = scaled_shape(spec);
  CHECK(s.neck_depths == std::vector<int>{12, 12, 12, 12});
  CHECK(s.neck_widths == std::vector<int>{256, 128, 128, 256, 256, 512});

  SplitMix64 rng(75);
  auto g = build_neck<float>(spec, rng);
  CHECK(body_depths(g, "neck.") == std::vector<int>{12, 12, 12, 12});
}

TEST_CASE("yolov6n-v1 neck emits the (32, 64, 128) output triple") {
  SplitMix64 rng(76);
  auto g = build_neck<double>(ModelSpec::named(Variant::N, Version::V1), rng);
  CHECK(g.nodes[g.taps[0]].out_ch == 32);
  CHECK(g.nodes[g.taps[1]].out_ch == 64);
  CHECK(g.nodes[g.taps[2]].out_ch == 128);

  std::vector<Tensor4<double>> ins;
  ins.push_back(random_tensor<double>(rng, 1, 64, 8, 8));
  ins.push_back(random_tensor<double>(rng, 1, 128, 4, 4));
  ins.push_back(random_tensor<double>(rng, 1, 256, 2, 2));
  auto outs = g.forward(ins);
  CHECK(outs[0].c == 32);
  CHECK(outs[0].h == 8);
  CHECK(outs[1].c == 64);
  CHECK(outs[1].h == 4);
  CHECK(outs[2].c == 128);
  CHECK(outs[2].h == 2);
}

TEST_CASE("yolov6m-v2 uses partial ratio 2/3 in every BepC3") {
  SplitMix64 rng(77);
  auto g = build_model<float>(ModelSpec::named(Variant::M, Version::V2), rng);
  auto ratios = bepc3_ratios(g);
  CHECK(ratios.size() == 8);  // four backbone bodies + four neck bodies
  for (double r : ratios) CHECK(r == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(count_rep_blocks(g) == 0);
}

TEST_CASE("yolov6l-v2 uses partial ratio 1/2 in every BepC3") {
  SplitMix64 rng(78);
  auto g = build_model<float>(ModelSpec::named(Variant::L, Version::V2), rng);
  auto ratios = bepc3_ratios(g);
  CHECK(ratios.size() == 8);
  for (double r : ratios) CHECK(r == 0.5);
  CHECK(count_rep_blocks(g) == 0);
}

TEST_CASE("v1 and small v2 graphs contain no BepC3 nodes") {
  SplitMix64 rng(79);
  for (const auto& row : {ModelSpec::named(Variant::N, Version::V1),
                          ModelSpec::named(Variant::S, Version::V1),
                          ModelSpec::named(Variant::N, Version::V2),
                          ModelSpec::named(Variant::S, Version::V2)}) {
    auto g = build_model<float>(row, rng);
    CHECK(count_bepc3(g) == 0);
    CHECK(count_rep_blocks(g) == 8);
  }
}

TEST_CASE("the pure-rep structure override builds a rep-style yolov6m") {
  ModelSpec spec = ModelSpec::named(Variant::M, Version::V2);
  spec.structure = BodyStyle::PureRep;
  SplitMix64 rng(80);
  auto g = build_model<float>(spec, rng);
  CHECK(count_bepc3(g) == 0);
  CHECK(count_rep_blocks(g) == 8);
}

TEST_CASE("every named variant builds a channel-consistent graph with three taps") {
  SplitMix64 rng(81);
  for (const auto& row : variant_table()) {
    auto g = build_model<float>(ModelSpec::named(row.variant, row.version), rng);
    g.validate();  // throws on any channel discontinuity
    for (int t : g.taps) CHECK(t >= 0);
  }
}

TEST_CASE("whole-model fusion matches the training form on yolov6n-v1") {
  const ModelSpec spec = ModelSpec::named(Variant::N, Version::V1);
  SplitMix64 rng(82);
  auto g = build_model<double>(spec, rng);
  auto fused = fuse_graph(g);
  CHECK(fused.mode == GraphMode::Fused);
  CHECK(graph_has_train_repconv(g));
  CHECK(!graph_has_train_repconv(fused));

  auto x = random_tensor<double>(rng, 1, 3, 64, 64);
  auto a = g.forward(x);
  auto b = fused.forward(x);
  for (int t = 0; t < 3; ++t) CHECK(max_abs_diff(a[t], b[t]) <= 1e-10);
}

TEST_CASE("whole-model fusion equivalence holds for every buildable variant") {
  for (const auto& row : variant_table()) {
    SplitMix64 rng(88);
    auto g = build_model<double>(ModelSpec::named(row.variant, row.version), rng);
    auto fused = fuse_graph(g);
    SplitMix64 in_rng(89);
    auto x = random_tensor<double>(in_rng, 1, 3, 32, 32);
    auto a = g.forward(x);
    auto b = fused.forward(x);
    for (int t = 0; t < 3; ++t) CHECK(max_abs_diff(a[t], b[t]) <= 1e-10);
  }
}

TEST_CASE("fusion strictly reduces the parameter count of every named variant") {
  SplitMix64 rng(83);
  for (const auto& row : variant_table()) {
    auto g = build_model<float>(ModelSpec::named(row.variant, row.version), rng);
    auto fused = fuse_graph(g);
    CHECK(graph_param_count(fused) < graph_param_count(g));
  }
}

TEST_CASE("fusing twice is rejected") {
  SplitMix64 rng(84);
  auto g = build_model<float>(ModelSpec::named(Variant::N, Version::V1), rng);
  auto fused = fuse_graph(g);
  CHECK(contains(error_message([&] { fuse_graph(fused); }), "already fused"));
}

TEST_CASE("forward_model shapes, determinism and input validation") {
  SplitMix64 rng(85);
  auto g = build_model<double>(ModelSpec::named(Variant::N, Version::V1), rng);
  auto x = random_tensor<double>(rng, 1, 3, 64, 64);
  auto a = g.forward(x);
  CHECK(a[0].h == 8);
  CHECK(a[0].w == 8);
  CHECK(a[1].h == 4);
  CHECK(a[2].h == 2);

  auto b = g.forward(x);
  for (int t = 0; t < 3; ++t) CHECK(bitwise_equal(a[t], b[t]));

  auto bad = random_tensor<double>(rng, 1, 3, 60, 60);
  CHECK(contains(error_message([&] { g.forward(bad); }), "divisible by 32"));
  auto wrong_c = random_tensor<double>(rng, 1, 4, 64, 64);
  CHECK(!error_message([&] { g.forward(wrong_c); }).empty());
}

TEST_CASE("model spec JSON parsing accepts the documented schema") {
  auto spec = ModelSpec::parse_json(R"({"variant": "n", "version": "v1"})");
  CHECK(spec.name() == "yolov6n-v1");
  CHECK(spec.depth_multiplier == doctest::Approx(0.33));
  CHECK(spec.width_multiplier == doctest::Approx(0.25));
  CHECK(!spec.csp_bodies());

  auto m = ModelSpec::parse_json(
      R"({"variant": "m", "version": "v2", "depth_multiplier": 0.60, "width_multiplier": 0.75,
          "partial_ratio": "2/3"})");
  CHECK(m.csp_bodies());
  CHECK(m.resolved_partial_ratio() == doctest::Approx(2.0 / 3.0));

  auto rep = ModelSpec::parse_json(R"({"variant": "m", "version": "v2", "structure": "rep"})");
  CHECK(!rep.csp_bodies());
}

TEST_CASE("model spec JSON parsing rejects bad documents") {
  auto err = [](const std::string& text) {
    return error_message([&] { ModelSpec::parse_json(text); });
  };
  CHECK(contains(err("{"), "not valid JSON"));
  CHECK(contains(err(R"({"version": "v1"})"), "variant"));
  CHECK(contains(err(R"({"variant": "x", "version": "v1"})"), "variant"));
  CHECK(contains(err(R"({"variant": "m", "version": "v1"})"), "no such model row"));
  CHECK(contains(err(R"({"variant": "l", "version": "v1"})"), "no such model row"));
  CHECK(contains(err(R"({"variant": "n", "version": "v1", "depth_multiplier": 0.5})"),
                 "depth_multiplier"));
  CHECK(contains(err(R"({"variant": "n", "version": "v1", "partial_ratio": 0.5})"),
                 "partial_ratio"));
  CHECK(contains(err(R"({"variant": "s", "version": "v2", "partial_ratio": 0.5})"),
                 "partial_ratio"));
  CHECK(contains(err(R"({"variant": "m", "version": "v2", "partial_ratio": 1.5})"), "(0,1)"));
  CHECK(contains(err(R"({"variant": "n", "version": "v1", "structure": "bepc3"})"), "v1"));
  CHECK(contains(err(R"({"variant": "n", "version": "v1", "mystery": 1})"), "unknown"));
  CHECK(contains(err(R"({"variant": "n", "version": "v1", "input_channels": 0})"),
                 "input_channels"));
}

TEST_CASE("a built graph is safe for concurrent forward passes") {
  SplitMix64 rng(86);
  const auto g = build_model<double>(ModelSpec::named(Variant::N, Version::V1), rng);
  auto x = random_tensor<double>(rng, 1, 3, 32, 32);
  const auto serial = g.forward(x);

  std::array<std::array<Tensor4<double>, 3>, 2> results;
  std::thread a([&] { results[0] = g.forward(x); });
  std::thread b([&] { results[1] = g.forward(x); });
  a.join();
  b.join();
  for (const auto& r : results)
    for (int t = 0; t < 3; ++t) CHECK(bitwise_equal(r[t], serial[t]));
}

TEST_CASE("builds are deterministic for a fixed seed") {
  const ModelSpec spec = ModelSpec::named(Variant::N, Version::V1);
  SplitMix64 rng_a(7), rng_b(7);
  auto a = build_model<double>(spec, rng_a);
  auto b = build_model<double>(spec, rng_b);
  SplitMix64 in_rng(1);
  auto x = random_tensor<double>(in_rng, 1, 3, 32, 32);
  auto ya = a.forward(x);
  auto yb = b.forward(x);
  for (int t = 0; t < 3; ++t) CHECK(bitwise_equal(ya[t], yb[t]));
}
