#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "reluspline/optim.hpp"

using namespace reluspline;

namespace {

std::vector<std::size_t> batch_sizes(const std::vector<std::vector<std::size_t>>& batches) {
  std::vector<std::size_t> out;
  for (const auto& b : batches) out.push_back(b.size());
  return out;
}

// Scalar Adadelta, written out from the update equations.
struct ScalarAdadelta {
  double rho = 0.95, eps = 1e-7, lr = 1.0;
  double eg2 = 0.0, edx2 = 0.0;
  double step(double g) {
    eg2 = rho * eg2 + (1 - rho) * g * g;
    const double d = -std::sqrt(edx2 + eps) / std::sqrt(eg2 + eps) * g;
    edx2 = rho * edx2 + (1 - rho) * d * d;
    return lr * d;
  }
};

}  // namespace

TEST_CASE("adadelta first step from hand evaluation") {
  std::vector<double> p{0.0};
  std::vector<double> g{1.0};
  const ParameterBlock params[] = {{"p", p}};
  const ParameterBlock grads[] = {{"p", g}};
  AdadeltaState state;
  adadelta_step(params, grads, state);
  CHECK(state.mean_sq_grad[0][0] == doctest::Approx(0.05).epsilon(1e-15));
  const double expected = -std::sqrt(1e-7) / std::sqrt(0.05 + 1e-7);
  CHECK(std::abs(p[0] - expected) <= 1e-12 * std::abs(expected));
  CHECK(p[0] == doctest::Approx(-1.41421e-3).epsilon(1e-5));
}

TEST_CASE("adadelta with zero gradient leaves parameters alone") {
  std::vector<double> p{1.5, -2.0};
  std::vector<double> g{0.0, 0.0};
  const ParameterBlock params[] = {{"p", p}};
  const ParameterBlock grads[] = {{"p", g}};
  AdadeltaState state;
  for (int i = 0; i < 5; ++i) adadelta_step(params, grads, state);
  CHECK(p[0] == 1.5);
  CHECK(p[1] == -2.0);
  CHECK(state.mean_sq_grad[0][0] == 0.0);
  CHECK(state.mean_sq_update[0][1] == 0.0);
}

TEST_CASE("adadelta decreases a scalar quadratic for 100 steps") {
  // Oracle: independent scalar simulation of the same update.
  ScalarAdadelta oracle;
  double q = 0.0;
  std::vector<double> p{0.0};
  std::vector<double> g{0.0};
  const ParameterBlock params[] = {{"p", p}};
  const ParameterBlock grads[] = {{"p", g}};
  AdadeltaState state;
  double loss = (p[0] - 3.0) * (p[0] - 3.0);
  for (int i = 0; i < 100; ++i) {
    g[0] = 2.0 * (p[0] - 3.0);
    adadelta_step(params, grads, state);
    q += oracle.step(2.0 * (q - 3.0));
    CHECK(p[0] == doctest::Approx(q).epsilon(1e-14));
    const double next = (p[0] - 3.0) * (p[0] - 3.0);
    CHECK(next < loss);
    loss = next;
  }
}

TEST_CASE("adadelta first step is nearly scale free") {
  const double base = -std::sqrt(1e-7) / std::sqrt(0.05 + 1e-7);
  for (double c : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    std::vector<double> p{0.0};
    std::vector<double> g{c};
    const ParameterBlock params[] = {{"p", p}};
    const ParameterBlock grads[] = {{"p", g}};
    AdadeltaState state;
    adadelta_step(params, grads, state);
    CHECK(std::abs(std::abs(p[0]) - std::abs(base)) / std::abs(base) < 1e-3);
  }
}

TEST_CASE("adadelta rejects non-finite gradients by block name") {
  RngStream rng(1);
  MlpNetwork net = glorot_uniform_init({2, 3, 1}, rng);
  const MlpNetwork before = net;
  MlpGradients g = backprop(net, standard_normal(rng, 4, 2), standard_normal(rng, 4, 1));
  g.biases[1][0] = std::numeric_limits<double>::quiet_NaN();
  AdadeltaState state;
  try {
    adadelta_step(net, g, state);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("b2") != std::string::npos);
  }
  CHECK(net == before);
}

TEST_CASE("batching arithmetic") {
  RngStream rng(0);
  CHECK(batch_sizes(make_batches(1030, FixedWithRemainder{256}, rng, true)) ==
        std::vector<std::size_t>{256, 256, 256, 256, 6});
  CHECK(batch_sizes(make_batches(1030, FixedDropRemainder{256}, rng, true)) ==
        std::vector<std::size_t>{256, 256, 256, 256});
  CHECK(batch_sizes(make_batches(1000, FullBatch{}, rng, true)) == std::vector<std::size_t>{1000});
  CHECK(batch_sizes(make_batches(1024, FixedWithRemainder{256}, rng, false)) ==
        std::vector<std::size_t>{256, 256, 256, 256});
  CHECK(batch_sizes(make_batches(10, RandomSample{4, 3}, rng, false)) ==
        std::vector<std::size_t>{4, 4, 4});
  CHECK(batches_per_epoch(FixedWithRemainder{256}, 1030) == 5);
  CHECK(batches_per_epoch(FixedDropRemainder{256}, 1030) == 4);
  CHECK(batches_per_epoch(RandomSample{8, 7}, 1030) == 7);
  CHECK_THROWS(make_batches(10, FixedWithRemainder{0}, rng, true));
  CHECK_THROWS(make_batches(0, FullBatch{}, rng, true));
}

TEST_CASE("batch partition property") {
  std::mt19937_64 gen(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 700;
    const std::size_t b = 1 + gen() % 300;
    RngStream rng(trial);
    const bool shuffle = trial % 2 == 0;

    std::vector<std::size_t> all;
    for (const auto& batch : make_batches(n, FixedWithRemainder{b}, rng, shuffle))
      all.insert(all.end(), batch.begin(), batch.end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);

    std::vector<std::size_t> kept;
    for (const auto& batch : make_batches(n, FixedDropRemainder{b}, rng, shuffle))
      kept.insert(kept.end(), batch.begin(), batch.end());
    CHECK(kept.size() == b * (n / b));
    CHECK(std::set<std::size_t>(kept.begin(), kept.end()).size() == kept.size());
    for (std::size_t i : kept) CHECK(i < n);
  }
}

TEST_CASE("shuffled batches differ between epochs") {
  RngStream rng(4);
  const auto first = make_batches(100, FixedWithRemainder{10}, rng, true);
  const auto second = make_batches(100, FixedWithRemainder{10}, rng, true);
  CHECK(first != second);
  const auto ordered = make_batches(100, FixedWithRemainder{10}, rng, false);
  CHECK(ordered.front() == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("training step counts and checkpoints") {
  RngStream rng(12);
  const Matrix x = standard_normal(rng, 1000, 3);
  const Matrix y = standard_normal(rng, 1000, 1);
  MlpNetwork net = glorot_uniform_init({3, 8, 1}, rng);

  TrainConfig cfg;
  cfg.epochs = 5;
  TrialRecord r = train(net, x, y, cfg);
  CHECK(r.gradient_steps == 5);
  CHECK(r.checkpoints.size() == 6);
  for (std::size_t i = 0; i < r.checkpoints.size(); ++i) CHECK(r.checkpoints[i].epoch == i);

  cfg.batch_policy = FixedWithRemainder{256};
  cfg.epochs = 3;
  cfg.snapshot_every = 2;
  r = train(net, x, y, cfg);
  CHECK(r.gradient_steps == 3 * 4);
  REQUIRE(r.checkpoints.size() == 3);
  CHECK(r.checkpoints[1].epoch == 2);
  CHECK(r.checkpoints[2].epoch == 3);

  cfg.batch_policy = RandomSample{32, 7};
  r = train(net, x, y, cfg);
  CHECK(r.gradient_steps == 3 * 7);
}

TEST_CASE("training is deterministic given the seed") {
  RngStream rng(5);
  const Matrix x = standard_normal(rng, 100, 2);
  const Matrix y = standard_normal(rng, 100, 1);
  const MlpNetwork init = glorot_uniform_init({2, 8, 8, 1}, rng);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_policy = FixedWithRemainder{32};
  cfg.seed = 77;
  cfg.record_census = true;
  MlpNetwork a = init;
  MlpNetwork b = init;
  CHECK(train(a, x, y, cfg) == train(b, x, y, cfg));
  CHECK(a == b);
}

TEST_CASE("zero targets are a fixed point of a zero-bias net at zero input") {
  RngStream rng(6);
  const Matrix x(10, 1);
  const Matrix y(10, 1);
  MlpNetwork net = glorot_uniform_init({1, 8, 1}, rng);
  const MlpNetwork init = net;
  TrainConfig cfg;
  cfg.epochs = 10;
  const TrialRecord r = train(net, x, y, cfg);
  CHECK(r.checkpoints.front().train_mse == 0.0);
  CHECK(r.checkpoints.back().train_mse == 0.0);
  CHECK(net == init);
}

TEST_CASE("divergence stops training and keeps earlier checkpoints") {
  RngStream rng(7);
  const Matrix x = standard_normal(rng, 20, 1);
  Matrix y = standard_normal(rng, 20, 1);
  MlpNetwork net = glorot_uniform_init({1, 4, 1}, rng);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.adadelta.lr = 1e300;
  const TrialRecord r = train(net, x, y, cfg);
  CHECK(r.diverged);
  CHECK_FALSE(r.divergence_reason.empty());
  CHECK_FALSE(r.checkpoints.empty());
  for (const auto& cp : r.checkpoints) CHECK(std::isfinite(cp.train_mse));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS(cfg.validate());
  cfg.epochs = 5;
  cfg.snapshot_every = 0;
  CHECK_THROWS(cfg.validate());
  cfg.snapshot_every = 2;
  cfg.checkpoints = {7};
  CHECK_THROWS(cfg.validate());
  cfg.checkpoints = {3};
  CHECK(cfg.checkpoint_epochs() == std::vector<std::size_t>{0, 2, 3, 4, 5});
}

TEST_CASE("aggregation over trials") {
  auto make = [](std::size_t trial, double mse) {
    TrialRecord r;
    r.trial = trial;
    for (std::size_t e = 0; e < 3; ++e) r.checkpoints.push_back({e, mse, 2 * mse, {0.25}});
    return r;
  };
  const AggregateRecord single = aggregate({make(0, 1.5)});
  REQUIRE(single.checkpoints.size() == 3);
  CHECK(single.checkpoints[1].mse.mean == 1.5);
  CHECK(single.checkpoints[1].mse.stddev == 0.0);
  CHECK(single.checkpoints[1].dead_fractions[0].mean == 0.25);

  const AggregateRecord constant = aggregate({make(0, 2.0), make(1, 2.0), make(2, 2.0)});
  CHECK(constant.checkpoints[2].size.mean == 4.0);
  CHECK(constant.checkpoints[2].size.stddev == 0.0);

  std::vector<TrialRecord> records{make(0, 0.1), make(1, 0.7), make(2, 1e-3), make(3, 13.0)};
  TrialRecord bad = make(4, 1.0);
  bad.diverged = true;
  records.push_back(bad);
  const AggregateRecord forward_order = aggregate(records);
  std::reverse(records.begin(), records.end());
  std::swap(records[1], records[3]);
  const AggregateRecord shuffled = aggregate(records);
  CHECK(forward_order.trials_used == 4);
  CHECK(forward_order.diverged_trials == std::vector<std::size_t>{4});
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(forward_order.checkpoints[c].mse.mean == shuffled.checkpoints[c].mse.mean);
    CHECK(forward_order.checkpoints[c].mse.stddev == shuffled.checkpoints[c].mse.stddev);
  }
}

TEST_CASE("run_trials seeds trial i with base + i") {
  const TrialSet set = run_trials(100, 4, [](std::size_t, std::uint64_t seed) {
    TrialRecord r;
    r.checkpoints.push_back({0, static_cast<double>(seed), 0.0, {}});
    return r;
  });
  REQUIRE(set.trials.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(set.trials[i].trial == i);
    CHECK(set.trials[i].seed == 100 + i);
  }
  CHECK(set.aggregate.checkpoints[0].mse.mean == 101.5);
  CHECK_THROWS(run_trials(0, 0, [](std::size_t, std::uint64_t) { return TrialRecord{}; }));
}

TEST_CASE("trial record csv layout") {
  TrialRecord r;
  r.trial = 2;
  r.checkpoints.push_back({0, 1.0, 0.5, {0.0, 0.25}});
  CHECK(trial_records_csv({r}).str() ==
        "trial,epoch,mse,size,dead_frac_layer_1,dead_frac_layer_2\n2,0,1,0.5,0,0.25\n");
}
