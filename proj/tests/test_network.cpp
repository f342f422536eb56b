#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gradient_check.hpp"
#include "reluspline/network.hpp"

using namespace reluspline;

TEST_CASE("glorot limit and zero biases") {
  RngStream rng(1);
  const MlpNetwork net = glorot_uniform_init({3, 3, 3}, rng);
  for (const auto& layer : net.layers()) {
    for (double w : layer.weight.values()) CHECK(std::abs(w) <= 1.0);
    for (double b : layer.bias) CHECK(b == 0.0);
  }
  CHECK_THROWS(glorot_uniform_init({}, rng));
  CHECK_THROWS(glorot_uniform_init({3}, rng));
  CHECK_THROWS(glorot_uniform_init({3, 0, 1}, rng));
}

TEST_CASE("glorot weights for a 64x64 layer") {
  // 25 layers of 64x64 = 102400 weights.
  std::vector<std::size_t> sizes(26, 64);
  RngStream rng(77);
  const MlpNetwork net = glorot_uniform_init(sizes, rng);
  const double limit = std::sqrt(6.0 / 128.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& layer : net.layers()) {
    for (double w : layer.weight.values()) {
      CHECK(std::abs(w) <= limit);
      sum += w;
      ++n;
    }
  }
  // Uniform(-L, L) has sd L/sqrt(3).
  const double mean_sd = limit / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / static_cast<double>(n)) < 3.0 * mean_sd);
}

TEST_CASE("forward of a fresh zero-bias net at the origin is zero") {
  RngStream rng(4);
  const MlpNetwork net = glorot_uniform_init({3, 16, 16, 2}, rng);
  const ForwardTrace trace = forward(net, Matrix(5, 3));
  for (double v : trace.output().values()) CHECK(v == 0.0);
}

TEST_CASE("forward on a hand-built net") {
  MlpNetwork net({2, 2, 1});
  net.layers()[0].weight = Matrix::from_rows({{1, -1}, {0.5, 0.5}});
  net.layers()[0].bias = {0.0, -1.0};
  net.layers()[1].weight = Matrix::from_rows({{2, 3}});
  net.layers()[1].bias = {0.25};
  // x = (3, 1): z1 = (2, 1) -> (2, 1); out = 4 + 3 + 0.25.
  // x = (1, 3): z1 = (-2, 1) -> (0, 1); out = 3.25.
  const ForwardTrace t = forward(net, Matrix::from_rows({{3, 1}, {1, 3}}));
  CHECK(t.output()(0, 0) == 7.25);
  CHECK(t.output()(1, 0) == 3.25);
  CHECK(t.preactivations[0](1, 0) == -2.0);
  CHECK(t.postactivations[0](1, 0) == 0.0);
  CHECK(t.postactivations[1] == t.preactivations[1]);
  CHECK_THROWS_AS(forward(net, Matrix(1, 3)), ShapeError);
}

TEST_CASE("forward is pure") {
  RngStream rng(8);
  const MlpNetwork net = glorot_uniform_init({2, 8, 8, 1}, rng);
  const Matrix x = standard_normal(rng, 20, 2);
  const ForwardTrace a = forward(net, x);
  const ForwardTrace b = forward(net, x);
  CHECK(a.preactivations == b.preactivations);
  CHECK(a.postactivations == b.postactivations);
  CHECK(predict(net, x) == a.output());
}

TEST_CASE("mse basics and naive-loop oracle") {
  const Matrix p = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(mse(p, p) == 0.0);
  CHECK(mse(Matrix::from_rows({{3, 4}, {5, 6}}), p) == 4.0);
  CHECK_THROWS_AS(mse(p, Matrix(2, 1)), ShapeError);

  RngStream rng(12);
  const Matrix a = standard_normal(rng, 37, 3);
  const Matrix b = standard_normal(rng, 37, 3);
  double acc = 0.0;
  for (std::size_t i = 0; i < 37; ++i)
    for (std::size_t j = 0; j < 3; ++j) acc += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
  const double oracle = acc / (37.0 * 3.0);
  CHECK(std::abs(mse(a, b) - oracle) <= 1e-12 * oracle);
}

TEST_CASE("backprop matches central differences on 1-8-8-1") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto result = testing::gradient_check({1, 8, 8, 1}, seed);
    CHECK(result.checked > 0);
    CHECK(result.max_rel_error < 1e-6);
  }
}

TEST_CASE("gradient check over depth and width grid") {
  for (std::size_t depth : {1, 2, 4}) {
    for (std::size_t width : {4, 32}) {
      std::vector<std::size_t> sizes{2};
      for (std::size_t l = 0; l < depth; ++l) sizes.push_back(width);
      sizes.push_back(1);
      const auto result = testing::gradient_check(sizes, 100 + depth * 10 + width);
      INFO("depth " << depth << " width " << width);
      CHECK(result.max_rel_error < 1e-6);
    }
  }
}

TEST_CASE("dead neuron receives zero incoming gradient") {
  RngStream rng(5);
  MlpNetwork net = glorot_uniform_init({2, 4, 1}, rng);
  auto& first = net.layers()[0];
  for (std::size_t k = 0; k < 2; ++k) first.weight(1, k) = 0.0;
  first.bias[1] = -1.0;
  const Matrix x = standard_normal(rng, 10, 2);
  const Matrix y = standard_normal(rng, 10, 1);
  const MlpGradients g = backprop(net, x, y);
  CHECK(g.weights[0](1, 0) == 0.0);
  CHECK(g.weights[0](1, 1) == 0.0);
  CHECK(g.biases[0][1] == 0.0);
}

TEST_CASE("perfect prediction gives zero gradients") {
  RngStream rng(6);
  const MlpNetwork net = glorot_uniform_init({3, 5, 5, 2}, rng);
  const Matrix x = standard_normal(rng, 9, 3);
  MlpGradients g = backprop(net, x, predict(net, x));
  CHECK(g.loss == 0.0);
  for (const auto& block : g.parameter_blocks())
    for (double v : block.values) CHECK(v == 0.0);
}

TEST_CASE("positive homogeneity of a zero-bias net") {
  RngStream rng(31);
  const MlpNetwork net = glorot_uniform_init({1, 16, 16, 16, 1}, rng);
  for (int i = 0; i < 100; ++i) {
    const double x = 4.0 * rng.next_unit() - 2.0;
    const double c = 0.01 + 10.0 * rng.next_unit();
    const double fx = predict(net, Matrix(1, 1, x))(0, 0);
    const double fcx = predict(net, Matrix(1, 1, c * x))(0, 0);
    CHECK(std::abs(fcx - c * fx) <= 1e-9 * std::max(std::abs(fcx), 1e-300));
  }
}

TEST_CASE("clone is deep and equal") {
  RngStream rng(2);
  const MlpNetwork net = glorot_uniform_init({2, 3, 1}, rng);
  MlpNetwork copy = clone_network(net);
  CHECK(copy == net);
  CHECK(clone_network(copy) == net);
  copy.layers()[0].weight(0, 0) += 1.0;
  copy.layers()[1].bias[0] = 5.0;
  CHECK_FALSE(copy == net);
  CHECK(net.layers()[1].bias[0] == 0.0);
}

TEST_CASE("network text format round-trips exactly") {
  RngStream rng(10);
  MlpNetwork net = glorot_uniform_init({3, 7, 5, 2}, rng);
  for (auto& block : net.parameter_blocks())
    for (double& v : block.values) v += 1e-3 * rng.next_unit();
  std::stringstream ss;
  save_network(net, ss);
  const MlpNetwork back = load_network(ss);
  CHECK(back == net);

  std::stringstream bad("reluspline-mlp 1\nlayer_sizes 1 1\n0.5\n");
  CHECK_THROWS(load_network(bad));
  std::stringstream wrong_header("mlp 2\n");
  CHECK_THROWS(load_network(wrong_header));
}
