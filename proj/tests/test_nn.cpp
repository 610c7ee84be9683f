#include <catch2/catch_amalgamated.hpp>

#include "daibc/checkpoint.hpp"
#include "daibc/nn.hpp"
#include "testutil.hpp"

using namespace daibc;
using namespace daibc::nn;
using testutil::TempDir;

TEST_CASE("identity dense layer passes input through") {
  ParamStore<double> store;
  DenseLayer<double> layer(store, "l", 3, 3);
  for (int i = 0; i < 3; ++i) layer.W().value.at(i, i) = 1.0;
  Tensor<double> x = Tensor<double>::from({1, 3}, {1.0, 2.0, 3.0});
  Tensor<double> y = layer.forward(x, false);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);
}

TEST_CASE("all-zero weights give zero pre-activation and relu(0) = 0") {
  ParamStore<double> store;
  DenseLayer<double> layer(store, "l", 4, 2);
  ReluLayer<double> relu;
  Tensor<double> x = Tensor<double>::from({1, 4}, {0.3, -2.0, 5.0, 1.0});
  Tensor<double> y = layer.forward(x, false);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
  Tensor<double> z = relu.forward(y, false);
  for (int64_t i = 0; i < z.numel(); ++i) CHECK(z[i] == activation_at_zero(ActivationKind::Relu));
}

TEST_CASE("seeded 2-layer MLP matches straight-line recomputation") {
  ParamStore<double> store;
  Mlp<double> mlp(store, "m", 4, {5}, 3, false);
  store.init_uniform_fanin(99);
  Tensor<double> x = Tensor<double>::from({1, 4}, {0.25, -0.5, 0.75, 1.0});
  Tensor<double> y = mlp.forward(x, false);

  auto* W0 = store.find("m.fc0.W");
  auto* b0 = store.find("m.fc0.b");
  auto* W1 = store.find("m.fc1.W");
  auto* b1 = store.find("m.fc1.b");
  REQUIRE(W0 != nullptr);
  std::vector<double> h(5);
  for (int o = 0; o < 5; ++o) {
    double acc = b0->value[o];
    for (int i = 0; i < 4; ++i) acc += W0->value.at(o, i) * x[i];
    h[static_cast<size_t>(o)] = std::max(0.0, acc);
  }
  for (int o = 0; o < 3; ++o) {
    double acc = b1->value[o];
    for (int i = 0; i < 5; ++i) acc += W1->value.at(o, i) * h[static_cast<size_t>(i)];
    CHECK_THAT(y[o], Catch::Matchers::WithinAbs(acc, 1e-12));
  }
}

TEST_CASE("linear layer backward: ones upstream gives outer(1, x)") {
  ParamStore<double> store;
  DenseLayer<double> layer(store, "l", 3, 2);
  Tensor<double> x = Tensor<double>::from({1, 3}, {0.5, -1.5, 2.0});
  layer.forward(x, true);
  Tensor<double> g({1, 2}, 1.0);
  layer.backward(g);
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i) CHECK(layer.W().grad.at(o, i) == x[i]);
  CHECK(layer.b().grad[0] == 1.0);
  CHECK(layer.b().grad[1] == 1.0);
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
  ParamStore<double> store;
  Mlp<double> mlp(store, "m", 4, {6}, 2, false);
  store.init_uniform_fanin(7);
  Rng rng(3);
  Tensor<double> x = testutil::random_tensor<double>({2, 4}, rng);
  mlp.forward(x, true);
  mlp.backward(Tensor<double>({2, 2}, 0.0));
  for (auto& p : store.params())
    for (int64_t i = 0; i < p->grad.numel(); ++i) CHECK(p->grad[i] == 0.0);
}

TEST_CASE("mlp analytic gradients match finite differences") {
  ParamStore<double> store;
  Mlp<double> mlp(store, "m", 6, {8, 5}, 3, false);
  store.init_uniform_fanin(11);
  Rng rng(5);
  Tensor<double> x = testutil::random_tensor<double>({4, 6}, rng);
  // loss = 0.5 sum y^2, so upstream gradient is y itself
  auto loss_fn = [&]() {
    Tensor<double> y = mlp.forward(x, true);
    double loss = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) loss += 0.5 * y[i] * y[i];
    mlp.backward(y);
    return loss;
  };
  auto res = testutil::check_gradients(store, loss_fn);
  INFO(res.worst);
  CHECK(res.checked > 50);
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.skipped_kinks * 10 <= res.total);
}

TEST_CASE("conv encoder gradients match finite differences") {
  auto spec = testutil::tiny_conv_spec();
  ParamStore<double> store;
  ObsEncoder<double> enc(store, "bev", spec);
  store.init_uniform_fanin(13);
  Rng rng(17);
  Tensor<double> x = testutil::random_binary<double>({3, 2, 8, 8}, rng);
  auto loss_fn = [&]() {
    Tensor<double> y = enc.forward(x, true);
    double loss = 0.0;
    for (int64_t i = 0; i < y.numel(); ++i) loss += 0.5 * y[i] * y[i];
    enc.backward(y);
    return loss;
  };
  auto res = testutil::check_gradients(store, loss_fn);
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.skipped_kinks * 10 <= res.total);
}

TEST_CASE("adam: zero gradient at t=1 leaves parameters unchanged") {
  ParamStore<float> store;
  auto& p = store.add("w", {3});
  p.value[0] = 0.5f;
  p.value[1] = -0.25f;
  p.value[2] = 2.0f;
  adam_step(store, {.lr = 0.1});
  CHECK(p.value[0] == 0.5f);
  CHECK(p.value[1] == -0.25f);
  CHECK(p.value[2] == 2.0f);
  CHECK(store.adam_step_count == 1);
}

TEST_CASE("adam: first step is approximately -lr * sign(g)") {
  ParamStore<double> store;
  auto& p = store.add("w", {1});
  p.value[0] = 0.5;
  p.grad[0] = 0.3;
  adam_step(store, {.lr = 0.01});
  // hand-evaluated recurrence at t=1: m_hat = g, v_hat = g^2
  const double expect = 0.5 - 0.01 * 0.3 / (0.3 + 1e-8);
  CHECK_THAT(p.value[0], Catch::Matchers::WithinAbs(expect, 1e-12));
}

TEST_CASE("adam: lr=0 keeps parameters but updates moments") {
  ParamStore<double> store;
  auto& p = store.add("w", {1});
  p.value[0] = 1.25;
  p.grad[0] = -2.0;
  adam_step(store, {.lr = 0.0});
  CHECK(p.value[0] == 1.25);
  CHECK_THAT(p.m[0], Catch::Matchers::WithinAbs(-0.2, 1e-15));
  CHECK_THAT(p.v[0], Catch::Matchers::WithinAbs(0.004, 1e-15));
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  ParamStore<double> store;
  auto& p = store.add("w", {2, 2});
  p.grad = Tensor<double>({3});
  CHECK_THROWS_AS(adam_step(store, {}), ShapeError);
}

TEST_CASE("dense layer reports shape mismatches with the layer name") {
  ParamStore<double> store;
  DenseLayer<double> layer(store, "fuse.obs", 4, 2);
  CHECK_THROWS_WITH(layer.forward(Tensor<double>({1, 5}), false),
                    Catch::Matchers::ContainsSubstring("fuse.obs"));
}

TEST_CASE("seeded init and forward are bit-identical across instances") {
  auto build = [] {
    auto store = std::make_unique<ParamStore<float>>();
    Mlp<float> mlp(*store, "m", 5, {7}, 2, false);
    store->init_uniform_fanin(123);
    return std::pair{std::move(store), std::move(mlp)};
  };
  auto [s1, m1] = build();
  auto [s2, m2] = build();
  Rng rng(9);
  Tensor<float> x = testutil::random_tensor<float>({3, 5}, rng);
  Tensor<float> y1 = m1.forward(x, false);
  Tensor<float> y2 = m2.forward(x, false);
  for (int64_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("checkpoint round trip is byte-exact") {
  TempDir tmp("ckpt");
  auto spec = testutil::tiny_mlp_spec();
  ParamStore<float> store;
  Mlp<float> mlp(store, "m", 4, {5}, 2, false);
  store.init_uniform_fanin(42);
  store.adam_step_count = 17;
  const auto p1 = tmp.path / "a.ckpt";
  const auto p2 = tmp.path / "b.ckpt";
  save_checkpoint(p1, store, spec, "test", 42);

  ParamStore<float> loaded;
  Mlp<float> mlp2(loaded, "m", 4, {5}, 2, false);
  auto info = load_checkpoint(p1, loaded);
  CHECK(info.policy_kind == "test");
  CHECK(info.seed == 42);
  CHECK(loaded.adam_step_count == 17);
  save_checkpoint(p2, loaded, spec_from_json(spec_to_json(spec)), info.policy_kind, info.seed,
                  info.meta);
  CHECK(read_text_file(p1) == read_text_file(p2));
}

TEST_CASE("checkpoint rejects mismatched stores") {
  TempDir tmp("ckpt_bad");
  auto spec = testutil::tiny_mlp_spec();
  ParamStore<float> store;
  Mlp<float> mlp(store, "m", 4, {5}, 2, false);
  store.init_uniform_fanin(1);
  const auto p = tmp.path / "a.ckpt";
  save_checkpoint(p, store, spec, "test", 1);
  ParamStore<float> other;
  Mlp<float> mlp2(other, "m", 4, {6}, 2, false);
  CHECK_THROWS_AS(load_checkpoint(p, other), InputError);
}
