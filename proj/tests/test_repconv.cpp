#include <doctest.h>

#include "blocks.hpp"
#include "test_support.hpp"

using namespace repnet;
using namespace repnet::test;

TEST_CASE("fold_batchnorm with identity BN leaves the conv unchanged") {
  SplitMix64 rng(21);
  auto conv = detail::random_conv<double>(rng, 4, 6, 3, 1, 1);
  auto folded = fold_batchnorm(conv, BatchNormParams<double>::identity(6));
  CHECK(bitwise_equal(folded.weight, conv.weight));
  for (double b : folded.bias) CHECK(b == 0.0);
}

TEST_CASE("fold_batchnorm with a pure scale doubles weights and bias") {
  SplitMix64 rng(22);
  auto conv = detail::random_conv<double>(rng, 3, 4, 3, 1, 1);
  conv.bias.resize(4);
  for (auto& b : conv.bias) b = rng.range(-1.0, 1.0);

  auto bn = BatchNormParams<double>::identity(4);
  bn.gamma.assign(4, 2.0);
  auto folded = fold_batchnorm(conv, bn);
  for (size_t i = 0; i < conv.weight.size(); ++i)
    CHECK(folded.weight[i] == 2.0 * conv.weight[i]);
  for (int o = 0; o < 4; ++o) CHECK(folded.bias[o] == 2.0 * conv.bias[o]);
}

TEST_CASE("fold_batchnorm two-path comparison on random parameters") {
  SplitMix64 rng(23);
  for (int i = 0; i < 20; ++i) {
    const int in_ch = rng.range_int(1, 6);
    const int out_ch = rng.range_int(1, 6);
    auto conv = detail::random_conv<double>(rng, in_ch, out_ch, 3, 1, 1);
    auto bn = detail::random_bn<double>(rng, out_ch);
    auto x = random_tensor<double>(rng, 1, in_ch, 7, 7);
    auto unfolded = batchnorm_infer(conv2d(x, conv), bn);
    auto folded = conv2d(x, fold_batchnorm(conv, bn));
    CHECK(max_abs_diff(unfolded, folded) <= 1e-12);
  }
}

TEST_CASE("fold_batchnorm rejects mismatched channels") {
  SplitMix64 rng(24);
  auto conv = detail::random_conv<double>(rng, 3, 4, 3, 1, 1);
  auto bn = detail::random_bn<double>(rng, 5);
  CHECK(contains(error_message([&] { fold_batchnorm(conv, bn); }), "channels"));
}

TEST_CASE("pad_1x1_to_3x3 centers the kernel value") {
  std::vector<double> w{5.0};
  auto padded = pad_1x1_to_3x3(w, 1, 1);
  const std::vector<double> want{0, 0, 0, 0, 5.0, 0, 0, 0, 0};
  CHECK(padded == want);

  std::vector<double> zeros(6, 0.0);
  for (double v : pad_1x1_to_3x3(zeros, 2, 3)) CHECK(v == 0.0);
}

TEST_CASE("pad_1x1_to_3x3 preserves the conv semantics at stride 1") {
  SplitMix64 rng(25);
  auto one = detail::random_conv<double>(rng, 3, 4, 1, 1, 0);
  ConvParams<double> three = one;
  three.k = 3;
  three.padding = 1;
  three.weight = pad_1x1_to_3x3(one.weight, 4, 3);
  auto x = random_tensor<double>(rng, 1, 3, 6, 6);
  auto a = conv2d(x, one);
  auto b = conv2d(x, three);
  REQUIRE(a.same_shape(b));
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.data[i] == b.data[i]);
}

TEST_CASE("identity_conv is a Dirac kernel and the identity map") {
  auto p = identity_conv<double>(1);
  const std::vector<double> want{0, 0, 0, 0, 1.0, 0, 0, 0, 0};
  CHECK(p.weight == want);

  SplitMix64 rng(26);
  auto x = random_tensor<double>(rng, 1, 4, 8, 8);
  CHECK(bitwise_equal(conv2d(x, identity_conv<double>(4)), x));
}

TEST_CASE("identity_conv composed with BN and folded equals the BN alone") {
  SplitMix64 rng(27);
  auto bn = detail::random_bn<double>(rng, 3);
  auto folded = fold_batchnorm(identity_conv<double>(3), bn);
  auto x = random_tensor<double>(rng, 1, 3, 5, 5);
  CHECK(max_abs_diff(conv2d(x, folded), batchnorm_infer(x, bn)) <= 1e-12);
}

TEST_CASE("fuse_repconv of zero branches with identity BN is the identity") {
  auto rc = identity_repconv<double>(4, Activation::None);
  auto fc = fuse_repconv(rc);
  CHECK(bitwise_equal(fc.params.weight, identity_conv<double>(4).weight));
  for (double b : fc.params.bias) CHECK(b == 0.0);

  SplitMix64 rng(28);
  auto x = random_tensor<double>(rng, 1, 4, 6, 6);
  CHECK(bitwise_equal(fc.forward(x), x));
}

TEST_CASE("fuse_repconv stride-2 block with a zero 3x3 branch equals the 1x1 branch") {
  SplitMix64 rng(29);
  RepConvTrain<double> rc;
  rc.in_ch = 4;
  rc.out_ch = 6;
  rc.stride = 2;
  rc.activation = Activation::None;
  rc.branch3x3.conv = zero_conv<double>(4, 6, 3, 2, 1);
  rc.branch3x3.bn = shift_zero_bn<double>(6, 1.3, 0.9);
  rc.branch1x1.conv = detail::random_conv<double>(rng, 4, 6, 1, 2, 0);
  rc.branch1x1.bn = detail::random_bn<double>(rng, 6);

  auto fc = fuse_repconv(rc);
  auto x = random_tensor<double>(rng, 1, 4, 8, 8);
  auto direct = batchnorm_infer(conv2d(x, rc.branch1x1.conv), rc.branch1x1.bn);
  CHECK(max_abs_diff(fc.forward(x), direct) <= 1e-12);
}

TEST_CASE("fuse_repconv matches forward_train on a seeded 8->8 block") {
  SplitMix64 rng(30);
  auto rc = random_repconv<double>(rng, 8, 8, 1);
  auto fc = fuse_repconv(rc);
  auto x = random_tensor<double>(rng, 1, 8, 8, 8);
  CHECK(max_abs_diff(rc.forward(x), fc.forward(x)) <= 1e-12);

  SplitMix64 rng32(30);
  auto rc32 = random_repconv<float>(rng32, 8, 8, 1);
  auto fc32 = fuse_repconv(rc32);
  auto x32 = random_tensor<float>(rng32, 1, 8, 8, 8);
  CHECK(max_abs_diff(rc32.forward(x32), fc32.forward(x32)) <= 1e-4);
}

TEST_CASE("forward_train of silenced branches is all zero after relu") {
  RepConvTrain<double> rc;
  rc.in_ch = 3;
  rc.out_ch = 5;  // in != out, so no identity branch
  rc.stride = 1;
  rc.branch3x3.conv = zero_conv<double>(3, 5, 3, 1, 1);
  rc.branch3x3.bn = shift_zero_bn<double>(5);
  rc.branch1x1.conv = zero_conv<double>(3, 5, 1, 1, 0);
  rc.branch1x1.bn = shift_zero_bn<double>(5);

  SplitMix64 rng(31);
  auto x = random_tensor<double>(rng, 1, 3, 6, 6);
  for (double v : rc.forward(x).data) CHECK(v == 0.0);
}

TEST_CASE("forward_train of an identity-only block is relu(x)") {
  auto rc = identity_repconv<double>(3);
  SplitMix64 rng(32);
  auto x = random_tensor<double>(rng, 1, 3, 5, 5);
  CHECK(bitwise_equal(rc.forward(x), relu(x)));
}

TEST_CASE("forward_train equals the sum of individually computed branches") {
  SplitMix64 rng(33);
  auto rc = random_repconv<double>(rng, 6, 6, 1);
  auto x = random_tensor<double>(rng, 2, 6, 7, 7);
  auto manual = add(batchnorm_infer(conv2d(x, rc.branch3x3.conv), rc.branch3x3.bn),
                    batchnorm_infer(conv2d(x, rc.branch1x1.conv), rc.branch1x1.bn));
  manual = add(manual, batchnorm_infer(x, *rc.identity_bn));
  CHECK(bitwise_equal(rc.forward(x), relu(manual)));
}

TEST_CASE("fusion equivalence holds with and without the identity branch") {
  SplitMix64 rng(34);
  struct Cfg { int in, out, stride; } cfgs[] = {{6, 6, 1}, {6, 9, 1}, {6, 9, 2}, {6, 6, 2}};
  for (const auto& cfg : cfgs) {
    auto rc = random_repconv<double>(rng, cfg.in, cfg.out, cfg.stride);
    CHECK(rc.has_identity() == (cfg.in == cfg.out && cfg.stride == 1));
    auto r = verify_equivalence(rc, 4, 1e-10, 99);
    CHECK(r.passed);
  }
}

TEST_CASE("verify_equivalence on the exact identity config reports zero deviation") {
  auto rc = identity_repconv<double>(4);
  auto r = verify_equivalence(rc, 3, 1e-12, 5);
  CHECK(r.passed);
  CHECK(r.max_abs_deviation == 0.0);
}

TEST_CASE("verify_equivalence passes a random config at 1e-10 in f64") {
  SplitMix64 rng(35);
  auto rc = random_repconv<double>(rng, 5, 5, 1);
  auto r = verify_equivalence(rc, 5, 1e-10, 7);
  CHECK(r.passed);
  CHECK(r.trials == 5);
}

TEST_CASE("a perturbed fused kernel fails verification") {
  SplitMix64 rng(36);
  auto rc = random_repconv<double>(rng, 5, 5, 1);
  auto fc = fuse_repconv(rc);
  fc.params.weight[0] += 1e-2;
  auto r = compare_paths(rc, fc, 3, 1e-10, 7);
  CHECK(!r.passed);
  CHECK(r.max_abs_deviation > 1e-10);
}

TEST_CASE("fused parameter count is out*in*9 + out regardless of branch count") {
  SplitMix64 rng(37);
  auto three_branch = fuse_repconv(random_repconv<double>(rng, 7, 7, 1));
  CHECK(param_count(three_branch) == 7ull * 7 * 9 + 7);
  auto two_branch = fuse_repconv(random_repconv<double>(rng, 7, 9, 2));
  CHECK(param_count(two_branch) == 9ull * 7 * 9 + 9);
}

TEST_CASE("fuse_repconv is deterministic") {
  SplitMix64 rng(38);
  auto rc = random_repconv<double>(rng, 6, 6, 1);
  auto a = fuse_repconv(rc);
  auto b = fuse_repconv(rc);
  CHECK(bitwise_equal(a.params.weight, b.params.weight));
  CHECK(bitwise_equal(a.params.bias, b.params.bias));
}

TEST_CASE("re-fusing a fused conv wrapped as a degenerate block is idempotent") {
  SplitMix64 rng(39);
  for (const int stride : {1, 2}) {
    auto rc = random_repconv<double>(rng, 5, stride == 1 ? 5 : 8, stride);
    auto fc = fuse_repconv(rc);
    auto fc2 = fuse_repconv(wrap_fused_as_train(fc));
    CHECK(bitwise_equal(fc2.params.weight, fc.params.weight));
    CHECK(bitwise_equal(fc2.params.bias, fc.params.bias));
  }
}

TEST_CASE("repconv invariant violations are rejected") {
  SplitMix64 rng(40);
  auto rc = random_repconv<double>(rng, 4, 4, 1);
  rc.identity_bn.reset();  // in == out at stride 1 requires the identity branch
  CHECK(contains(error_message([&] { rc.validate(); }), "identity"));

  auto rc2 = random_repconv<double>(rng, 4, 6, 2);
  rc2.identity_bn = detail::random_bn<double>(rng, 6);
  CHECK(contains(error_message([&] { rc2.validate(); }), "identity"));

  auto rc3 = random_repconv<double>(rng, 4, 4, 1);
  rc3.branch3x3.conv.bias.assign(4, 0.1);
  CHECK(contains(error_message([&] { rc3.validate(); }), "bias"));

  auto x = random_tensor<double>(rng, 1, 3, 6, 6);
  auto rc4 = random_repconv<double>(rng, 4, 4, 1);
  CHECK(contains(error_message([&] { rc4.forward(x); }), "channels"));
}
