#include "reluspline/decomposition.hpp"

#include <algorithm>
#include <stdexcept>

namespace reluspline {

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974ULL;

struct Snapshots {
  // [checkpoint][sample]
  std::vector<std::vector<double>> at_data;
  std::vector<std::vector<double>> at_grid;
  bool diverged = false;
};

std::vector<double> column_values(const Matrix& m) {
  return {m.values().begin(), m.values().end()};
}

Snapshots train_and_snapshot(const MlpNetwork& init, const Matrix& x, const Matrix& y,
                             const Matrix& grid, TrainConfig config,
                             const std::vector<std::size_t>& wanted) {
  Snapshots snaps;
  snaps.at_data.resize(wanted.size());
  snaps.at_grid.resize(wanted.size());
  config.checkpoints = wanted;
  MlpNetwork net = clone_network(init);
  const TrialRecord record = train(net, x, y, config, [&](const Checkpoint& cp, const MlpNetwork& n) {
    for (std::size_t c = 0; c < wanted.size(); ++c) {
      if (wanted[c] != cp.epoch) continue;
      snaps.at_data[c] = column_values(predict(n, x));
      snaps.at_grid[c] = column_values(predict(n, grid));
    }
  });
  snaps.diverged = record.diverged;
  return snaps;
}

Matrix data_grid(const Matrix& x, std::size_t points) {
  const auto v = x.values();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return uniform_grid(points, {*lo, *hi});
}

double mse_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

}  // namespace

MlpNetwork init_for_trial(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed) {
  RngStream rng(derive_seed(seed, kInitStream));
  return glorot_uniform_init(layer_sizes, rng);
}

DecompositionResult noise_decomposition(const SplineNoiseData& data,
                                        const DecompositionOptions& options) {
  if (options.n_trials == 0) throw std::invalid_argument("noise_decomposition: need at least one trial");
  if (options.checkpoints.empty()) throw std::invalid_argument("noise_decomposition: no checkpoints");
  if (!std::is_sorted(options.checkpoints.begin(), options.checkpoints.end())) {
    throw std::invalid_argument("noise_decomposition: checkpoints must be nondecreasing");
  }
  if (options.checkpoints.back() > options.train.epochs) {
    throw std::invalid_argument("noise_decomposition: checkpoint beyond the training length");
  }
  if (options.layer_sizes.front() != 1 || options.layer_sizes.back() != 1) {
    throw ShapeError("noise_decomposition: network must be 1-input, 1-output");
  }

  std::vector<std::size_t> wanted = options.checkpoints;
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());

  TrainConfig config = options.train;
  config.epochs = std::max<std::size_t>(1, wanted.back());
  config.snapshot_every = config.epochs;
  config.record_census = false;

  const Matrix grid = data_grid(data.x, options.grid_points);

  struct TrialOutput {
    Snapshots noisy, clean, noise;
  };
  std::vector<TrialOutput> outputs(options.n_trials);
  run_trials(
      options.base_seed, options.n_trials,
      [&](std::size_t trial, std::uint64_t seed) {
        const MlpNetwork init = init_for_trial(options.layer_sizes, seed);
        TrainConfig cfg = config;
        cfg.seed = seed;
        auto& out = outputs[trial];
        out.noisy = train_and_snapshot(init, data.x, data.noisy, grid, cfg, wanted);
        out.clean = train_and_snapshot(init, data.x, data.clean, grid, cfg, wanted);
        out.noise = train_and_snapshot(init, data.x, data.noise, grid, cfg, wanted);
        TrialRecord r;
        r.diverged = out.noisy.diverged || out.clean.diverged || out.noise.diverged;
        return r;
      },
      options.workers);

  DecompositionResult result;
  result.epochs = wanted;
  result.grid = column_values(grid);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const auto& o = outputs[k];
    if (o.noisy.diverged || o.clean.diverged || o.noise.diverged) {
      result.diverged_trials.push_back(k);
    } else {
      result.trials.push_back(k);
    }
  }
  if (result.trials.empty()) throw std::runtime_error("noise_decomposition: every trial diverged");

  const auto noise = column_values(data.noise);
  const double used = static_cast<double>(result.trials.size());
  for (std::size_t c = 0; c < wanted.size(); ++c) {
    std::vector<double> clean_mean(noise.size(), 0.0);
    std::vector<double> clean_mean_grid(result.grid.size(), 0.0);
    for (std::size_t k : result.trials) {
      for (std::size_t i = 0; i < clean_mean.size(); ++i) clean_mean[i] += outputs[k].clean.at_data[c][i];
      for (std::size_t i = 0; i < clean_mean_grid.size(); ++i) {
        clean_mean_grid[i] += outputs[k].clean.at_grid[c][i];
      }
    }
    for (double& v : clean_mean) v /= used;
    for (double& v : clean_mean_grid) v /= used;

    double pure = 0.0;
    double diff = 0.0;
    std::vector<std::vector<double>> noisy_grid, noise_grid, diff_grid;
    for (std::size_t k : result.trials) {
      const auto& o = outputs[k];
      std::vector<double> d(noise.size());
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = o.noisy.at_data[c][i] - clean_mean[i];
      diff += mse_vec(d, noise);
      pure += mse_vec(o.noise.at_data[c], noise);

      std::vector<double> dg(result.grid.size());
      for (std::size_t i = 0; i < dg.size(); ++i) dg[i] = o.noisy.at_grid[c][i] - clean_mean_grid[i];
      noisy_grid.push_back(o.noisy.at_grid[c]);
      noise_grid.push_back(o.noise.at_grid[c]);
      diff_grid.push_back(std::move(dg));
    }
    result.mse_pure.push_back(pure / used);
    result.mse_diff.push_back(diff / used);
    result.clean_mean_on_grid.push_back(std::move(clean_mean_grid));
    result.noisy_on_grid.push_back(std::move(noisy_grid));
    result.noise_on_grid.push_back(std::move(noise_grid));
    result.diff_on_grid.push_back(std::move(diff_grid));
  }
  return result;
}

CsvTable decomposition_csv(const DecompositionResult& result) {
  CsvTable table({"checkpoint", "mse_pure", "mse_diff"});
  for (std::size_t c = 0; c < result.epochs.size(); ++c) {
    table.add_row({std::to_string(result.epochs[c]), format_double(result.mse_pure[c]),
                   format_double(result.mse_diff[c])});
  }
  return table;
}

CsvTable decomposition_functions_csv(const DecompositionResult& result, std::size_t checkpoint_index) {
  if (checkpoint_index >= result.epochs.size()) {
    throw std::out_of_range("decomposition_functions_csv: checkpoint index out of range");
  }
  const std::size_t c = checkpoint_index;
  CsvTable table({"trial", "x", "f_noisy", "f_clean_mean", "f_noise", "diff"});
  for (std::size_t slot = 0; slot < result.trials.size(); ++slot) {
    for (std::size_t i = 0; i < result.grid.size(); ++i) {
      table.add_row({std::to_string(result.trials[slot]), format_double(result.grid[i]),
                     format_double(result.noisy_on_grid[c][slot][i]),
                     format_double(result.clean_mean_on_grid[c][i]),
                     format_double(result.noise_on_grid[c][slot][i]),
                     format_double(result.diff_on_grid[c][slot][i])});
    }
  }
  return table;
}

BoostResult artificial_boost(const Matrix& x, const Matrix& noise, const PwlFunction& carrier,
                             const std::vector<std::size_t>& layer_sizes, const TrainConfig& config,
                             std::uint64_t seed, std::size_t grid_points) {
  if (x.cols() != 1 || noise.cols() != 1 || x.rows() != noise.rows()) {
    throw ShapeError("artificial_boost: x and noise must be matching columns");
  }
  const auto dom = carrier.domain();
  for (double t : x.values()) {
    if (t < dom.lo || t > dom.hi) {
      throw std::invalid_argument("artificial_boost: carrier is not defined on the data domain");
    }
  }

  Matrix target(x.rows(), 1);
  std::vector<double> carrier_at_x(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    carrier_at_x[i] = carrier(x(i, 0));
    target(i, 0) = noise(i, 0) + carrier_at_x[i];
  }

  BoostResult result;
  const Matrix grid = data_grid(x, grid_points);
  result.grid = column_values(grid);

  TrainConfig cfg = config;
  cfg.seed = seed;
  MlpNetwork net = init_for_trial(layer_sizes, seed);
  result.record = train(net, x, target, cfg, [&](const Checkpoint& cp, const MlpNetwork& n) {
    const Matrix out = predict(n, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double r = out(i, 0) - carrier_at_x[i] - noise(i, 0);
      acc += r * r;
    }
    result.epochs.push_back(cp.epoch);
    result.mse_vs_noise.push_back(acc / static_cast<double>(x.rows()));
  });

  result.trained_on_grid = column_values(predict(net, grid));
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    const double c = carrier(result.grid[i]);
    result.carrier_on_grid.push_back(c);
    result.fit_on_grid.push_back(result.trained_on_grid[i] - c);
  }
  return result;
}

}  // namespace reluspline
