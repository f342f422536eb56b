#pragma once

// Exact piecewise-linear view of one-dimensional networks, plus the 1-D
// target generators used by the experiments.

#include <cstddef>
#include <span>
#include <vector>

#include "reluspline/core.hpp"
#include "reluspline/format.hpp"
#include "reluspline/network.hpp"

namespace reluspline {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Continuous piecewise-linear function on [breakpoints.front(),
/// breakpoints.back()], linear between adjacent breakpoints.
class PwlFunction {
 public:
  PwlFunction() = default;
  /// Throws unless breakpoints are strictly increasing (at least two) and
  /// all values are finite.
  PwlFunction(std::vector<double> breakpoints, std::vector<double> values);

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<double>& values() const { return values_; }
  Interval domain() const { return {breakpoints_.front(), breakpoints_.back()}; }
  std::size_t segment_count() const { return breakpoints_.size() - 1; }

  /// Linear interpolation; points outside the domain are extrapolated from
  /// the boundary segment.
  double operator()(double t) const;
  std::vector<double> slopes() const;
  double min_gap() const;

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
};

inline constexpr double kDefaultSlopeTolerance = 1e-8;

/// Extracts the exact piecewise-linear function computed by a 1-input,
/// 1-output network on [a, b].
///
/// Works layer by layer over one shared, sorted knot list. After layer l is
/// processed every unit up to l is affine between consecutive knots, so each
/// unit of layer l+1 can cross zero at most once per piece; those crossings
/// are inserted before layer l+1 is clamped. Crossings closer than
/// 1e-12 (b - a) to a knot merge into it. Final values come from a forward
/// pass at the knots.
PwlFunction extract_pwl(const MlpNetwork& net, double a, double b);

/// Number of maximal constant-slope runs. Neighbouring segments merge when
/// |s1 - s2| <= slope_tol (1 + max(|s1|, |s2|)).
std::size_t count_pieces(const PwlFunction& pwl, double slope_tol = kDefaultSlopeTolerance);

/// A network of one input whose value at t equals the original network at
/// base + t * direction.
struct LineRestriction {
  std::vector<double> base;
  std::vector<double> direction;
  MlpNetwork network;
};

LineRestriction restrict_to_line(const MlpNetwork& net, std::span<const double> base,
                                 std::span<const double> direction);

struct Dataset1d {
  Matrix x;  // n x 1
  Matrix y;  // n x 1
};

/// n evenly spaced points on [a, b] including both ends.
Matrix uniform_grid(std::size_t n, Interval domain);

/// Sawtooth of `n_teeth` equal periods over the domain. Each tooth ramps
/// from 0 up towards 1 and drops back to 0 exactly at the tooth boundary.
double sawtooth_value(double t, std::size_t n_teeth, Interval domain);
Dataset1d sawtooth_dataset(std::size_t n_points, std::size_t n_teeth, Interval domain);

/// Endpoints pinned to the domain ends, interior knots uniform, values
/// i.i.d. standard normal.
PwlFunction random_linear_spline(std::size_t n_knots, Interval domain, RngStream& rng);

struct SplineNoiseData {
  Matrix x;
  Matrix clean;
  Matrix noise;
  Matrix noisy;
};

/// Uniform grid over the spline's domain; noisy = clean + noise with noise
/// i.i.d. N(0, sigma^2).
SplineNoiseData spline_plus_noise(const PwlFunction& spline, std::size_t n_points,
                                  double noise_sigma, RngStream& rng);

/// Columns x,y, one row per breakpoint.
CsvTable pwl_csv(const PwlFunction& pwl);

}  // namespace reluspline
