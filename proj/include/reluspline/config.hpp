#pragma once

// Experiment configuration: a JSON document per run. Every key is optional
// except "experiment"; missing keys take the desk-tier defaults for that
// experiment (configs/<name>-desk.json holds exactly those values).

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "reluspline/optim.hpp"
#include "reluspline/pwl.hpp"

namespace reluspline {

/// Raised for malformed configs; the message starts with the key path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline constexpr int kConfigVersion = 1;

const std::vector<std::string>& experiment_names();

struct NetworkShape {
  std::size_t inputs = 1;
  std::size_t width = 32;
  std::size_t depth = 4;
  std::size_t outputs = 1;

  std::vector<std::size_t> layer_sizes() const;
  std::vector<std::size_t> layer_sizes(std::size_t depth_override) const;
  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct BatchSpec {
  /// full | fixed-remainder | fixed-drop | random
  std::string policy = "full";
  std::size_t size = 0;
  std::size_t steps_per_epoch = 0;
  /// Datasets smaller than this train full-batch instead.
  std::size_t min_points = 0;

  BatchPolicy policy_for(std::size_t n_points) const;
  friend bool operator==(const BatchSpec&, const BatchSpec&) = default;
};

struct TrainSpec {
  std::size_t epochs = 1;
  std::size_t snapshot_every = 1;
  bool shuffle = true;
  std::vector<std::size_t> checkpoints;
  BatchSpec batch;
  AdadeltaConfig adadelta;

  friend bool operator==(const TrainSpec&, const TrainSpec&) = default;
};

struct DataSpec {
  std::size_t n_points = 0;
  std::size_t n_teeth = 16;
  std::size_t n_knots = 8;
  Interval domain{-1.0, 1.0};
  double noise_ratio = 0.3;
  std::size_t grid_points = 512;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> depths;
  std::vector<std::size_t> census_layers;

  friend bool operator==(const DataSpec& a, const DataSpec& b) {
    return a.n_points == b.n_points && a.n_teeth == b.n_teeth && a.n_knots == b.n_knots &&
           a.domain.lo == b.domain.lo && a.domain.hi == b.domain.hi &&
           a.noise_ratio == b.noise_ratio && a.grid_points == b.grid_points &&
           a.sizes == b.sizes && a.depths == b.depths && a.census_layers == b.census_layers;
  }
};

struct ExperimentConfig {
  std::string experiment;
  std::string tier = "desk";
  int config_version = kConfigVersion;
  std::uint64_t base_seed = 0;
  std::size_t n_trials = 1;
  std::size_t workers = 0;
  std::string output_dir;
  NetworkShape network;
  TrainSpec train;
  DataSpec data;
  bool boost = false;

  /// Cross-field checks; throws ConfigError naming the field.
  void validate() const;
  TrainConfig train_config(std::size_t n_points, std::uint64_t seed) const;

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.experiment == b.experiment && a.tier == b.tier && a.config_version == b.config_version &&
           a.base_seed == b.base_seed && a.n_trials == b.n_trials && a.workers == b.workers &&
           a.output_dir == b.output_dir && a.network == b.network && a.train == b.train &&
           a.data == b.data && a.boost == b.boost;
  }
};

/// Built-in configs; tier is "desk" or "paper".
ExperimentConfig default_config(const std::string& experiment, const std::string& tier = "desk");

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Full JSON form, every key present, stable key order.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace reluspline
