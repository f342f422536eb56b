#pragma once

// The five experiments: compute results from a config, render them to
// output files, and write those files with a manifest.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reluspline/analysis.hpp"
#include "reluspline/config.hpp"
#include "reluspline/decomposition.hpp"
#include "reluspline/heatmap.hpp"
#include "reluspline/optim.hpp"
#include "reluspline/pwl.hpp"

namespace reluspline {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Sub-seed stream for a trial's synthetic data.
inline constexpr std::uint64_t kDataStream = 0x64617461;

struct DegenerateResult {
  TrialSet trials;
};

struct SizeHeatmapDepth {
  std::size_t depth = 0;
  HeatmapGrid size;
  HeatmapGrid mse;
  std::vector<TrialSet> per_size;  // parallel to the config's sizes
};

struct SizeHeatmapResult {
  std::vector<std::size_t> sizes;
  /// Mean over trials of the targets' sum of squares, per size.
  std::vector<double> reference;
  std::vector<std::string> batching;  // policy used per size
  std::vector<std::size_t> batches_per_epoch;
  std::vector<SizeHeatmapDepth> depths;
};

struct StuckDump {
  std::size_t trial = 0;
  std::size_t epoch = 0;
  double train_mse = 0.0;
  std::size_t pieces = 0;
  PwlFunction pwl;
  std::vector<double> on_grid;
};

struct StuckResult {
  Dataset1d data;
  std::vector<double> grid;
  std::vector<double> target_on_grid;
  std::vector<TrialRecord> records;
  std::vector<StuckDump> dumps;  // ordered by trial, then epoch
};

struct LinearityResult {
  PwlFunction spline;
  double noise_sigma = 0.0;
  SplineNoiseData data;
  DecompositionResult decomposition;
  std::optional<BoostResult> boost;
};

DegenerateResult run_degenerate(const ExperimentConfig& config);
SizeHeatmapResult run_size_heatmap(const ExperimentConfig& config);
StuckResult run_stuck(const ExperimentConfig& config);
LinearityResult run_linearity(const ExperimentConfig& config);

/// Training data for one size-heatmap cell: standard-normal inputs and targets.
void size_heatmap_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed, Matrix& x,
                       Matrix& y);

/// File name -> contents for one run, excluding the manifest and config echo.
using OutputFiles = std::map<std::string, std::string>;

OutputFiles render_degenerate(const ExperimentConfig& config, const DegenerateResult& result);
OutputFiles render_size_heatmap(const ExperimentConfig& config, const SizeHeatmapResult& result);
OutputFiles render_stuck(const ExperimentConfig& config, const StuckResult& result);
OutputFiles render_linearity(const ExperimentConfig& config, const LinearityResult& result);

/// Runs the configured experiment and renders its files.
OutputFiles experiment_files(const ExperimentConfig& config);

/// Key/value manifest: versions, seed, trial count and a digest per file.
std::string manifest_text(const ExperimentConfig& config, const OutputFiles& files);

struct RunSummary {
  std::string output_dir;
  std::vector<std::string> files;  // every file written, manifest included
};

/// Writes the experiment's files plus config.json and manifest.txt into
/// config.output_dir, creating it if needed.
RunSummary run_experiment(const ExperimentConfig& config);

}  // namespace reluspline
