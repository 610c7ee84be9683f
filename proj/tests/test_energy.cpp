#include <catch2/catch_amalgamated.hpp>

#include "daibc/energy.hpp"
#include "testutil.hpp"

using namespace daibc;
using namespace daibc::ebm;
using Catch::Matchers::WithinAbs;

TEST_CASE("infonce closed forms") {
  SECTION("equal energies with three negatives") {
    std::vector<double> negs = {1.7, 1.7, 1.7};
    auto t = infonce_term(1.7, negs);
    CHECK_THAT(t.p_tilde, WithinAbs(0.25, 1e-12));
    CHECK_THAT(t.loss, WithinAbs(std::log(4.0), 1e-12));
  }
  SECTION("zero positive against a single ln(3) negative") {
    std::vector<double> negs = {std::log(3.0)};
    auto t = infonce_term(0.0, negs);
    CHECK_THAT(t.p_tilde, WithinAbs(0.75, 1e-12));
  }
  SECTION("softmax terms sum to one") {
    Rng rng(3);
    std::vector<double> negs(64);
    for (double& e : negs) e = rng.uniform(-5, 5);
    auto t = infonce_term(0.3, negs);
    double total = t.p_tilde;
    // reconstruct the negative softmax terms from the gradient identities
    for (double g : t.g_neg) total += -g;
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));
    CHECK(t.p_tilde > 0.0);
    CHECK(t.p_tilde < 1.0);
  }
  SECTION("lower positive energy strictly increases p_tilde") {
    std::vector<double> negs = {0.5, -0.2, 1.0};
    double prev = 0.0;
    for (double e : {2.0, 1.0, 0.0, -1.0, -2.0}) {
      auto t = infonce_term(e, negs);
      CHECK(t.p_tilde > prev);
      prev = t.p_tilde;
    }
  }
  SECTION("shift invariance is exact for integer energies") {
    std::vector<double> negs = {2.0, 5.0, -3.0};
    auto a = infonce_term(1.0, negs);
    std::vector<double> shifted = {2.0 + 64.0, 5.0 + 64.0, -3.0 + 64.0};
    auto b = infonce_term(1.0 + 64.0, shifted);
    CHECK(a.p_tilde == b.p_tilde);
    CHECK(a.loss == b.loss);
  }
  SECTION("weight scales the loss and gradients") {
    std::vector<double> negs = {0.3};
    auto t1 = infonce_term(0.0, negs, 1.0);
    auto t2 = infonce_term(0.0, negs, 2.5);
    CHECK_THAT(t2.loss, WithinAbs(2.5 * t1.loss, 1e-12));
    CHECK_THAT(t2.g_pos, WithinAbs(2.5 * t1.g_pos, 1e-12));
  }
}

TEST_CASE("uniform negative sampler") {
  EbmTrainConfig cfg;
  cfg.n_neg = 64;
  Rng rng(9);
  auto negs = sample_negatives_uniform(4, cfg, rng);
  negs.validate(-1.0f, 1.0f);
  CHECK(negs.batch() == 4);

  SECTION("per-component mean is zero within 3 sigma and KS-uniform") {
    EbmTrainConfig big;
    big.n_neg = 100000;
    Rng r2(10);
    auto n2 = sample_negatives_uniform(1, big, r2);
    std::vector<double> steer, acc;
    for (const auto& a : n2.actions) {
      steer.push_back(a.steering);
      acc.push_back(a.accel);
    }
    const double sigma = (2.0 / std::sqrt(12.0)) / std::sqrt(100000.0);
    CHECK(std::abs(testutil::mean(steer)) < 3.0 * sigma);
    CHECK(std::abs(testutil::mean(acc)) < 3.0 * sigma);
    CHECK(testutil::ks_uniform_ok(steer, -1.0, 1.0));
    CHECK(testutil::ks_uniform_ok(acc, -1.0, 1.0));
  }
}

TEST_CASE("expert-perturbed negative sampler") {
  SECTION("sigma = 0 reproduces expert actions exactly") {
    std::vector<Action> expert = {{0.25f, -0.5f}, {-0.75f, 0.125f}};
    EbmTrainConfig cfg;
    cfg.n_neg = 32;
    cfg.sigma_neg = 0.0;
    Rng rng(4);
    auto negs = sample_negatives_da(expert, 2, cfg, rng);
    for (const auto& a : negs.actions) {
      const bool is0 = a.steering == expert[0].steering && a.accel == expert[0].accel;
      const bool is1 = a.steering == expert[1].steering && a.accel == expert[1].accel;
      CHECK((is0 || is1));
    }
  }
  SECTION("noise scale matches sigma") {
    std::vector<Action> expert = {{0.0f, 0.0f}};
    EbmTrainConfig cfg;
    cfg.n_neg = 100000;
    cfg.sigma_neg = 0.1;
    Rng rng(12);
    auto negs = sample_negatives_da(expert, 1, cfg, rng);
    std::vector<double> steer;
    for (const auto& a : negs.actions) steer.push_back(a.steering);
    const double sd = testutil::stddev(steer);
    CHECK(std::abs(sd - 0.1) < 3.0 * 0.1 / std::sqrt(2.0 * 100000.0));
    CHECK(std::abs(testutil::mean(steer)) < 3.0 * 0.1 / std::sqrt(100000.0));
  }
  SECTION("perturbed bound actions clip back inside the box") {
    std::vector<Action> expert = {{1.0f, 1.0f}};
    EbmTrainConfig cfg;
    cfg.n_neg = 2000;
    cfg.sigma_neg = 0.5;
    Rng rng(13);
    auto negs = sample_negatives_da(expert, 1, cfg, rng);
    negs.validate(-1.0f, 1.0f);
  }
  SECTION("empty expert minibatch is an error") {
    EbmTrainConfig cfg;
    Rng rng(1);
    CHECK_THROWS_AS(sample_negatives_da({}, 1, cfg, rng), InputError);
  }
}

namespace {
template <class T>
struct EnergyFixture {
  nn::NetworkSpec spec = testutil::tiny_mlp_spec();
  EnergyNet<T> net{spec, 80};
  Tensor<T> bev, state;
  std::vector<Action> positives;

  // seeds chosen so no ReLU pre-activation sits within the FD window
  explicit EnergyFixture(int batch) {
    Rng rng(23);
    bev = testutil::random_binary<T>({batch, 2, 4, 4}, rng);
    state = testutil::random_tensor<T>({batch, 3}, rng);
    for (int i = 0; i < batch; ++i)
      positives.push_back({static_cast<float>(rng.uniform(-1, 1)),
                           static_cast<float>(rng.uniform(-1, 1))});
  }
};
}  // namespace

TEST_CASE("energy batch is consistent under duplication, permutation, unbatching") {
  EnergyFixture<float> fx(1);
  std::vector<Action> ys = {{0.1f, 0.2f}, {-0.5f, 0.9f}, {0.1f, 0.2f}, {0.0f, -1.0f}};
  auto e = fx.net.energy_batch(fx.bev, fx.state, ys);
  REQUIRE(e.size() == 4);
  CHECK(e[0] == e[2]);  // duplicated action, identical energy

  std::vector<Action> perm = {ys[3], ys[0], ys[1], ys[2]};
  auto ep = fx.net.energy_batch(fx.bev, fx.state, perm);
  CHECK(ep[1] == e[0]);
  CHECK(ep[0] == e[3]);

  for (size_t i = 0; i < ys.size(); ++i) {
    auto single = fx.net.energy_batch(fx.bev, fx.state, std::span<const Action>(&ys[i], 1));
    CHECK_THAT(single[0], WithinAbs(e[i], 1e-6));
  }
}

TEST_CASE("energy rejects out-of-bounds and empty action lists") {
  EnergyFixture<float> fx(1);
  CHECK_THROWS_AS(fx.net.energy_batch(fx.bev, fx.state, {}), InputError);
  std::vector<Action> bad = {{1.5f, 0.0f}};
  CHECK_THROWS_AS(fx.net.energy_batch(fx.bev, fx.state, bad), InputError);
}

TEST_CASE("infonce loss gradients match finite differences") {
  EnergyFixture<double> fx(3);
  REQUIRE(fx.net.store().param_count() <= 1000);
  EbmTrainConfig cfg;
  cfg.n_neg = 5;
  Rng nrng(31);
  auto negs = sample_negatives_uniform(3, cfg, nrng);

  SECTION("unweighted") {
    auto res = testutil::check_gradients(fx.net.store(), [&] {
      return fx.net.loss_and_grad(fx.bev, fx.state, fx.positives, negs).loss;
    });
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.skipped_kinks * 10 <= res.total);
  }
  SECTION("weighted") {
    std::vector<double> w = {0.3, 1.8, 0.9};
    auto res = testutil::check_gradients(fx.net.store(), [&] {
      return fx.net.loss_and_grad(fx.bev, fx.state, fx.positives, negs, w).loss;
    });
    INFO(res.worst);
    CHECK(res.max_rel_err < 1e-4);
    CHECK(res.skipped_kinks * 10 <= res.total);
  }
}

TEST_CASE("infonce loss with a conv encoder also passes the gradient check") {
  nn::NetworkSpec spec = testutil::tiny_conv_spec();
  EnergyNet<double> net(spec, 7);
  REQUIRE(net.store().param_count() <= 1000);
  Rng rng(25);
  Tensor<double> bev = testutil::random_binary<double>({2, 2, 8, 8}, rng);
  Tensor<double> state = testutil::random_tensor<double>({2, 3}, rng);
  std::vector<Action> pos = {{0.3f, -0.2f}, {-0.8f, 0.6f}};
  EbmTrainConfig cfg;
  cfg.n_neg = 4;
  Rng nrng(5);
  auto negs = sample_negatives_uniform(2, cfg, nrng);
  auto res = testutil::check_gradients(net.store(), [&] {
    return net.loss_and_grad(bev, state, pos, negs).loss;
  });
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-4);
  CHECK(res.skipped_kinks * 10 <= res.total);
}

TEST_CASE("infonce rejects misaligned negative sets") {
  EnergyFixture<float> fx(3);
  EbmTrainConfig cfg;
  cfg.n_neg = 4;
  Rng rng(2);
  auto negs = sample_negatives_uniform(2, cfg, rng);  // batch 2, not 3
  CHECK_THROWS_AS(fx.net.loss_and_grad(fx.bev, fx.state, fx.positives, negs), InputError);
}

TEST_CASE("training on a fixed synthetic set decreases smoothed infonce loss") {
  auto spec = testutil::tiny_mlp_spec();
  EnergyNet<float> net(spec, 3);
  Rng rng(40);
  const int B = 8;
  Tensor<float> bev = testutil::random_binary<float>({B, 2, 4, 4}, rng);
  Tensor<float> state = testutil::random_tensor<float>({B, 3}, rng);
  std::vector<Action> pos;
  for (int i = 0; i < B; ++i)
    pos.push_back(i % 2 == 0 ? Action{-0.5f, 0.3f} : Action{0.5f, 0.3f});
  EbmTrainConfig cfg;
  cfg.n_neg = 16;
  std::vector<double> losses;
  Rng nrng(41);
  for (int it = 0; it < 100; ++it) {
    auto negs = sample_negatives_uniform(B, cfg, nrng);
    net.store().zero_grad();
    losses.push_back(net.loss_and_grad(bev, state, pos, negs).loss);
    nn::adam_step(net.store(), {.lr = 1e-3});
  }
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) {
    early += losses[static_cast<size_t>(i)];
    late += losses[losses.size() - 10 + static_cast<size_t>(i)];
  }
  CHECK(late < early);
}
