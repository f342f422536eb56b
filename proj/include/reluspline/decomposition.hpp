#pragma once

// Signal/noise training decomposition: train the same initializations on
// X + N, on X and on N, then compare how fast N is recovered directly versus
// as the difference between the noisy fits and the mean clean fit.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "reluspline/analysis.hpp"
#include "reluspline/optim.hpp"
#include "reluspline/pwl.hpp"

namespace reluspline {

/// Network used by trial `seed`: Glorot init from a stream derived from the
/// seed, so every data set trained under that seed starts identically.
MlpNetwork init_for_trial(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed);

struct DecompositionOptions {
  std::vector<std::size_t> layer_sizes{1, 32, 32, 32, 32, 1};
  TrainConfig train;
  std::size_t n_trials = 5;
  std::uint64_t base_seed = 0;
  /// Epochs to evaluate; nondecreasing and within train.epochs.
  std::vector<std::size_t> checkpoints;
  std::size_t grid_points = 512;
  std::size_t workers = 0;
};

struct DecompositionResult {
  std::vector<std::size_t> epochs;
  std::vector<double> mse_pure;
  std::vector<double> mse_diff;
  std::vector<std::size_t> trials;           // trials that entered the means
  std::vector<std::size_t> diverged_trials;
  std::vector<double> grid;
  // [checkpoint][grid point]
  std::vector<std::vector<double>> clean_mean_on_grid;
  // [checkpoint][trial slot][grid point], trial slot indexes `trials`
  std::vector<std::vector<std::vector<double>>> noisy_on_grid;
  std::vector<std::vector<std::vector<double>>> noise_on_grid;
  std::vector<std::vector<std::vector<double>>> diff_on_grid;
};

/// For each checkpoint: diff_k = f_k(X+N) - mean_j f_j(X) at the training
/// inputs, mse_diff = mean_k MSE(diff_k, N), mse_pure = mean_k MSE(f_k(N), N).
/// A trial whose run diverges on any of the three data sets is dropped.
DecompositionResult noise_decomposition(const SplineNoiseData& data,
                                        const DecompositionOptions& options);

/// Columns checkpoint,mse_pure,mse_diff.
CsvTable decomposition_csv(const DecompositionResult& result);
/// Columns trial,x,f_noisy,f_clean_mean,f_noise,diff for one checkpoint.
CsvTable decomposition_functions_csv(const DecompositionResult& result, std::size_t checkpoint_index);

struct BoostResult {
  std::vector<std::size_t> epochs;
  /// MSE of (trained output - carrier) against the noise, at the training inputs.
  std::vector<double> mse_vs_noise;
  std::vector<double> grid;
  std::vector<double> trained_on_grid;
  std::vector<double> carrier_on_grid;
  std::vector<double> fit_on_grid;  // trained - carrier
  TrialRecord record;
};

/// Trains on noise + carrier(x) and subtracts the known carrier.
BoostResult artificial_boost(const Matrix& x, const Matrix& noise, const PwlFunction& carrier,
                             const std::vector<std::size_t>& layer_sizes, const TrainConfig& config,
                             std::uint64_t seed, std::size_t grid_points = 512);

}  // namespace reluspline
