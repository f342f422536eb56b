#pragma once

// Measurements taken on a trained network: which hidden units are dead on
// the data, how large the fitted function is, and ensemble averages.

#include <cstddef>
#include <span>
#include <vector>

#include "reluspline/core.hpp"
#include "reluspline/format.hpp"
#include "reluspline/network.hpp"

namespace reluspline {

struct LayerCensus {
  std::size_t layer = 0;  // 1-based hidden layer index
  std::size_t neurons = 0;
  std::size_t dead = 0;
  double dead_fraction = 0.0;
};

struct CensusReport {
  std::vector<LayerCensus> layers;

  std::vector<double> dead_fractions() const;
};

/// A hidden unit is dead when its ReLU output is exactly 0.0 on every row
/// of `x`. Covers every hidden layer.
CensusReport dead_neuron_census(const MlpNetwork& net, const Matrix& x);
CensusReport dead_neuron_census(const ForwardTrace& trace);

/// Columns layer,neurons,dead,frac.
CsvTable census_csv(const CensusReport& report);

/// Sum (not mean) of squared outputs over all samples and output dims.
double size_metric(const MlpNetwork& net, const Matrix& x);

/// Sum of squares of the targets: the size an exact fit would reach.
double perfect_fit_reference(const Matrix& y);

/// Pointwise mean of the ensemble's outputs on `grid` (an n x 1 column).
/// Every member must be a 1-input, 1-output network.
std::vector<double> ensemble_mean_function(std::span<const MlpNetwork> nets, const Matrix& grid);

}  // namespace reluspline
