#include "reluspline/pwl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reluspline {

PwlFunction::PwlFunction(std::vector<double> breakpoints, std::vector<double> values)
    : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
  if (breakpoints_.size() < 2) throw std::invalid_argument("PwlFunction: need at least two breakpoints");
  if (breakpoints_.size() != values_.size()) {
    throw ShapeError("PwlFunction: breakpoint and value counts differ");
  }
  require_finite(breakpoints_, "PwlFunction breakpoints");
  require_finite(values_, "PwlFunction values");
  for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
    if (!(breakpoints_[i] > breakpoints_[i - 1])) {
      throw std::invalid_argument("PwlFunction: breakpoints must be strictly increasing");
    }
  }
}

double PwlFunction::operator()(double t) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
  std::size_t i = it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  i = std::min(i, breakpoints_.size() - 2);
  const double x0 = breakpoints_[i];
  const double x1 = breakpoints_[i + 1];
  const double w = (t - x0) / (x1 - x0);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

std::vector<double> PwlFunction::slopes() const {
  std::vector<double> s(segment_count());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = (values_[i + 1] - values_[i]) / (breakpoints_[i + 1] - breakpoints_[i]);
  }
  return s;
}

double PwlFunction::min_gap() const {
  double gap = breakpoints_[1] - breakpoints_[0];
  for (std::size_t i = 2; i < breakpoints_.size(); ++i) {
    gap = std::min(gap, breakpoints_[i] - breakpoints_[i - 1]);
  }
  return gap;
}

PwlFunction extract_pwl(const MlpNetwork& net, double a, double b) {
  if (net.input_dim() != 1 || net.output_dim() != 1) {
    throw ShapeError("extract_pwl: network is " + std::to_string(net.input_dim()) + "-in/" +
                     std::to_string(net.output_dim()) +
                     "-out; restrict it to a line with restrict_to_line first");
  }
  if (!(a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("extract_pwl: need finite a < b");
  }
  const double merge_tol = 1e-12 * (b - a);
  const auto& layers = net.layers();

  std::vector<double> knots{a, b};
  // Input to the layer being processed, one row per knot.
  std::vector<std::vector<double>> inputs{{a}, {b}};

  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const auto& layer = layers[l];
    const std::size_t width = layer.weight.rows();

    std::vector<std::vector<double>> pre(knots.size(), std::vector<double>(width));
    for (std::size_t i = 0; i < knots.size(); ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const auto w = layer.weight.row(j);
        double acc = layer.bias[j];
        for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * inputs[i][k];
        pre[i][j] = acc;
      }
    }

    std::vector<double> next_knots;
    std::vector<std::vector<double>> next_pre;
    next_knots.reserve(knots.size());
    next_pre.reserve(knots.size());
    std::vector<double> crossings;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      next_knots.push_back(knots[i]);
      next_pre.push_back(pre[i]);

      const double t0 = knots[i];
      const double t1 = knots[i + 1];
      crossings.clear();
      for (std::size_t j = 0; j < width; ++j) {
        const double z0 = pre[i][j];
        const double z1 = pre[i + 1][j];
        if ((z0 < 0.0 && z1 > 0.0) || (z0 > 0.0 && z1 < 0.0)) {
          crossings.push_back(t0 + (t1 - t0) * (z0 / (z0 - z1)));
        }
      }
      std::sort(crossings.begin(), crossings.end());
      double last = t0;
      for (double t : crossings) {
        if (t - last <= merge_tol || t1 - t <= merge_tol) continue;
        // Every unit of this layer is affine on [t0, t1].
        const double alpha = (t - t0) / (t1 - t0);
        std::vector<double> z(width);
        for (std::size_t j = 0; j < width; ++j) z[j] = pre[i][j] + alpha * (pre[i + 1][j] - pre[i][j]);
        next_knots.push_back(t);
        next_pre.push_back(std::move(z));
        last = t;
      }
    }
    next_knots.push_back(knots.back());
    next_pre.push_back(pre.back());

    knots = std::move(next_knots);
    inputs = std::move(next_pre);
    for (auto& row : inputs)
      for (double& v : row) v = v > 0.0 ? v : 0.0;
  }

  const Matrix out = predict(net, Matrix::column(knots));
  std::vector<double> values(knots.size());
  for (std::size_t i = 0; i < knots.size(); ++i) values[i] = out(i, 0);
  return PwlFunction(std::move(knots), std::move(values));
}

std::size_t count_pieces(const PwlFunction& pwl, double slope_tol) {
  if (!(slope_tol >= 0.0)) throw std::invalid_argument("count_pieces: slope_tol must be >= 0");
  const auto s = pwl.slopes();
  std::size_t pieces = 1;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double scale = 1.0 + std::max(std::abs(s[i - 1]), std::abs(s[i]));
    if (std::abs(s[i] - s[i - 1]) > slope_tol * scale) ++pieces;
  }
  return pieces;
}

LineRestriction restrict_to_line(const MlpNetwork& net, std::span<const double> base,
                                 std::span<const double> direction) {
  const std::size_t d = net.input_dim();
  if (base.size() != d || direction.size() != d) {
    throw ShapeError("restrict_to_line: base and direction need " + std::to_string(d) + " entries");
  }
  require_finite(base, "restrict_to_line base");
  require_finite(direction, "restrict_to_line direction");
  if (std::all_of(direction.begin(), direction.end(), [](double v) { return v == 0.0; })) {
    throw std::invalid_argument("restrict_to_line: direction must be nonzero");
  }

  auto sizes = net.layer_sizes();
  sizes.front() = 1;
  MlpNetwork restricted(sizes);
  for (std::size_t l = 1; l < net.layers().size(); ++l) restricted.layers()[l] = net.layers()[l];

  const auto& first = net.layers().front();
  auto& out = restricted.layers().front();
  for (std::size_t j = 0; j < first.weight.rows(); ++j) {
    const auto w = first.weight.row(j);
    double slope = 0.0;
    double offset = first.bias[j];
    for (std::size_t k = 0; k < d; ++k) {
      slope += w[k] * direction[k];
      offset += w[k] * base[k];
    }
    out.weight(j, 0) = slope;
    out.bias[j] = offset;
  }
  return {std::vector<double>(base.begin(), base.end()),
          std::vector<double>(direction.begin(), direction.end()), std::move(restricted)};
}

Matrix uniform_grid(std::size_t n, Interval domain) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  if (!(domain.lo < domain.hi)) throw std::invalid_argument("uniform_grid: empty domain");
  Matrix x(n, 1);
  const double step = (domain.hi - domain.lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) = domain.lo + step * static_cast<double>(i);
  x(n - 1, 0) = domain.hi;
  return x;
}

double sawtooth_value(double t, std::size_t n_teeth, Interval domain) {
  const double u = (t - domain.lo) * static_cast<double>(n_teeth) / (domain.hi - domain.lo);
  const double nearest = std::round(u);
  if (std::abs(u - nearest) < 1e-9) return 0.0;
  return u - std::floor(u);
}

Dataset1d sawtooth_dataset(std::size_t n_points, std::size_t n_teeth, Interval domain) {
  if (n_teeth == 0) throw std::invalid_argument("sawtooth_dataset: need at least one tooth");
  Dataset1d data{uniform_grid(n_points, domain), Matrix(n_points, 1)};
  for (std::size_t i = 0; i < n_points; ++i) {
    data.y(i, 0) = sawtooth_value(data.x(i, 0), n_teeth, domain);
  }
  return data;
}

PwlFunction random_linear_spline(std::size_t n_knots, Interval domain, RngStream& rng) {
  if (n_knots < 2) throw std::invalid_argument("random_linear_spline: need at least two knots");
  if (!(domain.lo < domain.hi)) throw std::invalid_argument("random_linear_spline: empty domain");
  std::vector<double> xs;
  xs.reserve(n_knots);
  xs.push_back(domain.lo);
  xs.push_back(domain.hi);
  while (xs.size() < n_knots) {
    const double t = domain.lo + (domain.hi - domain.lo) * rng.next_unit();
    if (std::find(xs.begin(), xs.end(), t) == xs.end()) xs.push_back(t);
  }
  std::sort(xs.begin(), xs.end());
  const Matrix values = standard_normal(rng, n_knots, 1);
  return PwlFunction(std::move(xs), {values.values().begin(), values.values().end()});
}

SplineNoiseData spline_plus_noise(const PwlFunction& spline, std::size_t n_points,
                                  double noise_sigma, RngStream& rng) {
  if (n_points == 0) throw std::invalid_argument("spline_plus_noise: need at least one point");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("spline_plus_noise: sigma must be >= 0");
  SplineNoiseData data;
  const Interval dom = spline.domain();
  if (n_points == 1) {
    data.x = Matrix(1, 1, 0.5 * (dom.lo + dom.hi));
  } else {
    data.x = uniform_grid(n_points, dom);
  }
  data.clean = Matrix(n_points, 1);
  data.noisy = Matrix(n_points, 1);
  data.noise = Matrix(n_points, 1);
  const Matrix z = standard_normal(rng, n_points, 1);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double clean = spline(data.x(i, 0));
    data.clean(i, 0) = clean;
    data.noisy(i, 0) = clean + noise_sigma * z(i, 0);
    // Stored as the rounded difference so noisy - clean == noise holds exactly.
    data.noise(i, 0) = data.noisy(i, 0) - clean;
  }
  return data;
}

CsvTable pwl_csv(const PwlFunction& pwl) {
  CsvTable table({"x", "y"});
  for (std::size_t i = 0; i < pwl.breakpoints().size(); ++i) {
    table.add_row({format_double(pwl.breakpoints()[i]), format_double(pwl.values()[i])});
  }
  return table;
}

}  // namespace reluspline
