#include <doctest.h>

#include <cmath>

#include "pwl_oracle.hpp"
#include "reluspline/optim.hpp"
#include "reluspline/pwl.hpp"

using namespace reluspline;

namespace {

MlpNetwork single_neuron(double weight, double bias) {
  MlpNetwork net({1, 1, 1});
  net.layers()[0].weight(0, 0) = weight;
  net.layers()[0].bias[0] = bias;
  net.layers()[1].weight(0, 0) = 1.0;
  return net;
}

MlpNetwork briefly_trained(const std::vector<std::size_t>& sizes, std::uint64_t seed, std::size_t steps) {
  RngStream rng(seed);
  MlpNetwork net = glorot_uniform_init(sizes, rng);
  const PwlFunction spline = random_linear_spline(8, {-1.0, 1.0}, rng);
  const SplineNoiseData data = spline_plus_noise(spline, 64, 0.2, rng);
  TrainConfig cfg;
  cfg.epochs = steps;
  cfg.snapshot_every = steps;
  cfg.seed = seed;
  train(net, data.x, data.noisy, cfg);
  return net;
}

}  // namespace

TEST_CASE("single neuron relu(t - 0.5) on [0, 1]") {
  const PwlFunction pwl = extract_pwl(single_neuron(1.0, -0.5), 0.0, 1.0);
  REQUIRE(pwl.breakpoints().size() == 3);
  CHECK(pwl.breakpoints()[0] == 0.0);
  CHECK(pwl.breakpoints()[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pwl.breakpoints()[2] == 1.0);
  CHECK(pwl.values()[0] == 0.0);
  CHECK(pwl.values()[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(pwl.values()[2] == 0.5);
  CHECK(count_pieces(pwl) == 2);
}

TEST_CASE("zero-bias nets have at most two pieces") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    const std::size_t depth = 1 + seed % 5;
    const std::size_t width = 4 + (seed * 7) % 60;
    std::vector<std::size_t> sizes{1};
    for (std::size_t l = 0; l < depth; ++l) sizes.push_back(width);
    sizes.push_back(1);
    const MlpNetwork net = glorot_uniform_init(sizes, rng);
    const PwlFunction pwl = extract_pwl(net, -10.0, 10.0);
    CHECK(count_pieces(pwl) <= 2);
    // Dense sampling: f is linear on each side of the origin.
    const double left = testing::eval1(net, -1.0);
    const double right = testing::eval1(net, 1.0);
    for (double t : {-9.5, -3.0, -0.25}) {
      CHECK(testing::eval1(net, t) == doctest::Approx(-t * left).epsilon(1e-9));
    }
    for (double t : {0.25, 3.0, 9.5}) {
      CHECK(testing::eval1(net, t) == doctest::Approx(t * right).epsilon(1e-9));
    }
  }
}

TEST_CASE("extraction agrees with forward on a trained 1-32-32-1 net") {
  const MlpNetwork net = briefly_trained({1, 32, 32, 1}, 17, 300);
  const PwlFunction pwl = extract_pwl(net, -1.0, 1.0);
  CHECK(testing::max_relative_deviation(pwl, net, -1.0, 1.0) < 1e-9);
}

TEST_CASE("piece count matches the slope-change oracle") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    MlpNetwork net = briefly_trained({1, 12, 12, 1}, seed, 50);
    RngStream rng(seed + 1000);
    for (auto& layer : net.layers())
      for (double& b : layer.bias) b += 0.5 * rng.next_normal_pair().first;
    const PwlFunction pwl = extract_pwl(net, -2.0, 2.0);
    if (pwl.min_gap() <= 1e-6) continue;
    testing::SlopeChangeOracle oracle(net, kDefaultSlopeTolerance);
    INFO("seed " << seed);
    CHECK(oracle.count(-2.0, 2.0, pwl.min_gap() / 100.0) == count_pieces(pwl));
  }
}

TEST_CASE("slope-change oracle on hand-built nets") {
  const MlpNetwork neuron = single_neuron(1.0, -0.5);
  testing::SlopeChangeOracle one(neuron, kDefaultSlopeTolerance);
  CHECK(one.count(0.0, 1.0, 1e-9) == 2);
  CHECK(one.count(0.6, 1.0, 1e-9) == 1);

  // relu(t) - 2 relu(t - 0.5) + relu(t - 1): flat, up, down, flat.
  MlpNetwork hat({1, 3, 1});
  auto& in = hat.layers()[0];
  auto& out = hat.layers()[1];
  for (std::size_t i = 0; i < 3; ++i) in.weight(i, 0) = 1.0;
  in.bias = {0.0, -0.5, -1.0};
  out.weight(0, 0) = 1.0;
  out.weight(0, 1) = -2.0;
  out.weight(0, 2) = 1.0;
  testing::SlopeChangeOracle oracle(hat, kDefaultSlopeTolerance);
  CHECK(oracle.count(-1.0, 2.0, 1e-9) == 4);
  CHECK(count_pieces(extract_pwl(hat, -1.0, 2.0)) == 4);
}

TEST_CASE("extract_pwl rejects multi-dimensional networks") {
  RngStream rng(1);
  const MlpNetwork net = glorot_uniform_init({3, 4, 1}, rng);
  CHECK_THROWS_AS(extract_pwl(net, 0.0, 1.0), ShapeError);
  try {
    extract_pwl(net, 0.0, 1.0);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("restrict_to_line") != std::string::npos);
  }
  CHECK_THROWS(extract_pwl(single_neuron(1, 0), 1.0, 1.0));
}

TEST_CASE("count_pieces merges collinear segments") {
  const PwlFunction line({0, 0.1, 0.5, 0.7, 1}, {1, 1.2, 2, 2.4, 3});
  CHECK(count_pieces(line) == 1);
  CHECK(count_pieces(PwlFunction({0, 1}, {0, 5})) == 1);
  CHECK_THROWS(count_pieces(line, -1.0));
}

TEST_CASE("exactly sampled sawtooth has two pieces per tooth") {
  // Ramp over [k, k + 1 - d], steep drop over [k + 1 - d, k + 1].
  for (std::size_t teeth : {1, 3, 16}) {
    const double d = 1e-3;
    std::vector<double> xs{0.0};
    std::vector<double> ys{0.0};
    for (std::size_t k = 0; k < teeth; ++k) {
      xs.push_back(static_cast<double>(k) + 1.0 - d);
      ys.push_back(1.0 - d);
      xs.push_back(static_cast<double>(k) + 1.0);
      ys.push_back(0.0);
    }
    CHECK(count_pieces(PwlFunction(xs, ys)) == 2 * teeth);
  }
}

TEST_CASE("restriction to a line") {
  RngStream rng(5);
  const MlpNetwork one_d = briefly_trained({1, 8, 8, 1}, 5, 20);
  const std::vector<double> p0{0.0};
  const std::vector<double> v1{1.0};
  CHECK(restrict_to_line(one_d, p0, v1).network == one_d);

  MlpNetwork net = glorot_uniform_init({3, 16, 16, 1}, rng);
  for (auto& layer : net.layers())
    for (double& b : layer.bias) b = 0.3 * rng.next_normal_pair().first;
  const std::vector<double> base{0.3, -1.2, 0.5};
  const std::vector<double> dir{1.0, 0.5, -2.0};
  const LineRestriction line = restrict_to_line(net, base, dir);
  for (int i = 0; i < 1000; ++i) {
    const double t = 6.0 * rng.next_unit() - 3.0;
    Matrix x(1, 3);
    for (std::size_t k = 0; k < 3; ++k) x(0, k) = base[k] + t * dir[k];
    const double direct = predict(net, x)(0, 0);
    const double restricted = testing::eval1(line.network, t);
    CHECK(std::abs(direct - restricted) <= 1e-10 * std::max(1.0, std::abs(direct)));
  }

  // Scaling the direction by c rescales knots by 1/c.
  const double c = 2.5;
  std::vector<double> scaled = dir;
  for (double& s : scaled) s *= c;
  const PwlFunction a = extract_pwl(line.network, -3.0, 3.0);
  const PwlFunction b = extract_pwl(restrict_to_line(net, base, scaled).network, -3.0 / c, 3.0 / c);
  CHECK(count_pieces(a) == count_pieces(b));
  REQUIRE(a.breakpoints().size() == b.breakpoints().size());
  for (std::size_t i = 0; i < a.breakpoints().size(); ++i) {
    CHECK(b.breakpoints()[i] == doctest::Approx(a.breakpoints()[i] / c).epsilon(1e-9));
  }

  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK_THROWS(restrict_to_line(net, base, zero));
  CHECK_THROWS_AS(restrict_to_line(net, p0, v1), ShapeError);
}

TEST_CASE("sawtooth targets") {
  CHECK(sawtooth_value(0.5, 1, {0, 1}) == 0.5);
  const Dataset1d data = sawtooth_dataset(1001, 16, {-1, 1});
  for (double y : data.y.values()) {
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
  }
  // Tooth boundaries fall on grid points every 1000/16 = 62.5 samples, so
  // every other boundary is sampled: indices 0, 125, 250, ...
  for (std::size_t i = 0; i <= 1000; i += 125) CHECK(data.y(i, 0) == 0.0);
  CHECK(sawtooth_value(-1.0 + 2.0 / 16.0 * 0.25, 16, {-1, 1}) == doctest::Approx(0.25));
}

TEST_CASE("random linear splines") {
  RngStream rng(3);
  const PwlFunction two = random_linear_spline(2, {-1, 1}, rng);
  CHECK(two.segment_count() == 1);
  for (std::size_t knots : {3, 8, 20}) {
    const PwlFunction s = random_linear_spline(knots, {-1, 1}, rng);
    CHECK(s.breakpoints().size() == knots);
    CHECK(s.breakpoints().front() == -1.0);
    CHECK(s.breakpoints().back() == 1.0);
    for (std::size_t i = 1; i < knots; ++i) CHECK(s.breakpoints()[i] > s.breakpoints()[i - 1]);
    CHECK(count_pieces(s) <= knots - 1);
  }
  CHECK_THROWS(random_linear_spline(1, {-1, 1}, rng));
}

TEST_CASE("spline plus noise") {
  RngStream rng(8);
  const PwlFunction spline = random_linear_spline(8, {-1, 1}, rng);
  const SplineNoiseData quiet = spline_plus_noise(spline, 64, 0.0, rng);
  CHECK(quiet.noisy == quiet.clean);
  for (double v : quiet.noise.values()) CHECK(v == 0.0);

  const SplineNoiseData data = spline_plus_noise(spline, 64, 0.3, rng);
  CHECK(data.x.rows() == 64);
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(data.noisy(i, 0) - data.clean(i, 0) == data.noise(i, 0));
    CHECK(data.clean(i, 0) == spline(data.x(i, 0)));
  }
}

TEST_CASE("pwl csv lists breakpoints") {
  const PwlFunction f({0, 0.5, 1}, {0, 0, 0.5});
  CHECK(pwl_csv(f).str() == "x,y\n0,0\n0.5,0\n1,0.5\n");
}
