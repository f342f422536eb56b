#include "reluspline/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace reluspline {

namespace {

std::vector<double> column_values(const Matrix& m) { return {m.values().begin(), m.values().end()}; }

std::string u(std::size_t v) { return std::to_string(v); }

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// x,y table over a grid.
std::string grid_table(const std::vector<double>& grid, const std::vector<double>& values) {
  CsvTable t({"x", "y"});
  for (std::size_t i = 0; i < grid.size(); ++i) t.add_row({format_double(grid[i]), format_double(values[i])});
  return t.str();
}

}  // namespace

DegenerateResult run_degenerate(const ExperimentConfig& config) {
  config.validate();
  const std::vector<std::size_t> sizes = config.network.layer_sizes();
  DegenerateResult result;
  result.trials = run_trials(
      config.base_seed, config.n_trials,
      [&](std::size_t, std::uint64_t seed) {
        RngStream rng(derive_seed(seed, kDataStream));
        const Matrix x = standard_normal(rng, config.data.n_points, config.network.inputs);
        const Matrix y = standard_normal(rng, config.data.n_points, config.network.outputs);
        MlpNetwork net = init_for_trial(sizes, seed);
        TrainConfig tc = config.train_config(config.data.n_points, seed);
        tc.record_census = true;
        return train(net, x, y, tc);
      },
      config.workers);
  return result;
}

void size_heatmap_data(const ExperimentConfig& config, std::size_t n, std::uint64_t seed, Matrix& x,
                       Matrix& y) {
  RngStream rng(derive_seed(derive_seed(seed, kDataStream), n));
  x = standard_normal(rng, n, config.network.inputs);
  y = standard_normal(rng, n, config.network.outputs);
}

SizeHeatmapResult run_size_heatmap(const ExperimentConfig& config) {
  config.validate();
  SizeHeatmapResult result;
  result.sizes = config.data.sizes;
  for (std::size_t n : config.data.sizes) {
    double ref = 0.0;
    for (std::size_t t = 0; t < config.n_trials; ++t) {
      Matrix x;
      Matrix y;
      size_heatmap_data(config, n, config.base_seed + t, x, y);
      ref += perfect_fit_reference(y);
    }
    result.reference.push_back(ref / static_cast<double>(config.n_trials));
    const BatchPolicy policy = config.train.batch.policy_for(n);
    result.batching.push_back(describe(policy));
    result.batches_per_epoch.push_back(batches_per_epoch(policy, n));
  }

  for (std::size_t depth : config.data.depths) {
    SizeHeatmapDepth d;
    d.depth = depth;
    const std::vector<std::size_t> sizes = config.network.layer_sizes(depth);
    for (std::size_t n : config.data.sizes) {
      d.per_size.push_back(run_trials(
          config.base_seed, config.n_trials,
          [&](std::size_t, std::uint64_t seed) {
            Matrix x;
            Matrix y;
            size_heatmap_data(config, n, seed, x, y);
            MlpNetwork net = init_for_trial(sizes, seed);
            return train(net, x, y, config.train_config(n, seed));
          },
          config.workers));
    }
    for (HeatmapGrid* g : {&d.size, &d.mse}) {
      g->row_title = "n";
      g->col_title = "epoch";
      for (std::size_t n : config.data.sizes) g->row_labels.push_back(static_cast<double>(n));
    }
    for (std::size_t i = 0; i < d.per_size.size(); ++i) {
      const AggregateRecord& agg = d.per_size[i].aggregate;
      if (agg.trials_used == 0) {
        throw std::runtime_error("size-heatmap: every trial diverged at depth " + u(depth) + ", n = " +
                                 u(config.data.sizes[i]));
      }
      std::vector<double> size_row;
      std::vector<double> mse_row;
      std::vector<double> epochs;
      for (const auto& cp : agg.checkpoints) {
        epochs.push_back(static_cast<double>(cp.epoch));
        size_row.push_back(cp.size.mean);
        mse_row.push_back(cp.mse.mean);
      }
      if (i == 0) {
        d.size.col_labels = epochs;
        d.mse.col_labels = epochs;
      } else if (epochs != d.size.col_labels) {
        throw std::runtime_error("size-heatmap: checkpoint epochs differ between sizes");
      }
      d.size.cells.push_back(std::move(size_row));
      d.mse.cells.push_back(std::move(mse_row));
    }
    result.depths.push_back(std::move(d));
  }
  return result;
}

StuckResult run_stuck(const ExperimentConfig& config) {
  config.validate();
  StuckResult result;
  result.data = sawtooth_dataset(config.data.n_points, config.data.n_teeth, config.data.domain);
  const Matrix grid = uniform_grid(config.data.grid_points, config.data.domain);
  result.grid = column_values(grid);
  for (double t : result.grid) {
    result.target_on_grid.push_back(sawtooth_value(t, config.data.n_teeth, config.data.domain));
  }
  std::vector<std::size_t> wanted = config.train.checkpoints;
  if (wanted.empty()) wanted.push_back(config.train.epochs);

  const std::vector<std::size_t> sizes = config.network.layer_sizes();
  std::vector<std::vector<StuckDump>> slots(config.n_trials);
  const TrialSet set = run_trials(
      config.base_seed, config.n_trials,
      [&](std::size_t trial, std::uint64_t seed) {
        MlpNetwork net = init_for_trial(sizes, seed);
        std::vector<StuckDump>& out = slots[trial];
        return train(net, result.data.x, result.data.y, config.train_config(config.data.n_points, seed),
                     [&](const Checkpoint& cp, const MlpNetwork& n) {
                       if (std::find(wanted.begin(), wanted.end(), cp.epoch) == wanted.end()) return;
                       StuckDump dump;
                       dump.trial = trial;
                       dump.epoch = cp.epoch;
                       dump.train_mse = cp.train_mse;
                       dump.pwl = extract_pwl(n, config.data.domain.lo, config.data.domain.hi);
                       dump.pieces = count_pieces(dump.pwl);
                       dump.on_grid = column_values(predict(n, grid));
                       out.push_back(std::move(dump));
                     });
      },
      config.workers);
  result.records = set.trials;
  for (auto& s : slots)
    for (auto& d : s) result.dumps.push_back(std::move(d));
  return result;
}

LinearityResult run_linearity(const ExperimentConfig& config) {
  config.validate();
  LinearityResult result;
  RngStream rng(derive_seed(config.base_seed, kDataStream));
  result.spline = random_linear_spline(config.data.n_knots, config.data.domain, rng);
  // Noise scale relative to the clean signal at the sample points.
  const Matrix x = uniform_grid(config.data.n_points, config.data.domain);
  double mean = 0.0;
  for (double t : x.values()) mean += result.spline(t);
  mean /= static_cast<double>(x.rows());
  double var = 0.0;
  for (double t : x.values()) var += (result.spline(t) - mean) * (result.spline(t) - mean);
  var /= static_cast<double>(x.rows() - 1);
  result.noise_sigma = config.data.noise_ratio * std::sqrt(var);
  result.data = spline_plus_noise(result.spline, config.data.n_points, result.noise_sigma, rng);

  DecompositionOptions opts;
  opts.layer_sizes = config.network.layer_sizes();
  opts.train = config.train_config(config.data.n_points, config.base_seed);
  opts.n_trials = config.n_trials;
  opts.base_seed = config.base_seed;
  opts.checkpoints = config.train.checkpoints;
  if (opts.checkpoints.empty()) opts.checkpoints.push_back(config.train.epochs);
  opts.grid_points = config.data.grid_points;
  opts.workers = config.workers;
  result.decomposition = noise_decomposition(result.data, opts);

  if (config.boost) {
    TrainConfig tc = opts.train;
    tc.checkpoints = opts.checkpoints;
    result.boost = artificial_boost(result.data.x, result.data.noise, result.spline, opts.layer_sizes, tc,
                                    config.base_seed, config.data.grid_points);
  }
  return result;
}

OutputFiles render_degenerate(const ExperimentConfig& config, const DegenerateResult& result) {
  OutputFiles files;
  const AggregateRecord& agg = result.trials.aggregate;
  CsvTable census({"epoch", "layer", "neurons", "dead_frac_mean", "dead_frac_sd"});
  for (const auto& cp : agg.checkpoints) {
    for (std::size_t l = 0; l < cp.dead_fractions.size(); ++l) {
      census.add_row({u(cp.epoch), u(l + 1), u(config.network.width),
                      format_double(cp.dead_fractions[l].mean), format_double(cp.dead_fractions[l].stddev)});
    }
  }
  files["census.csv"] = census.str();

  CsvTable summary({"layer", "dead_frac_initial", "dead_frac_final"});
  if (!agg.checkpoints.empty()) {
    const auto& first = agg.checkpoints.front();
    const auto& last = agg.checkpoints.back();
    std::vector<std::size_t> layers = config.data.census_layers;
    if (layers.empty())
      for (std::size_t l = 1; l <= config.network.depth; ++l) layers.push_back(l);
    for (std::size_t l : layers) {
      summary.add_row({u(l), format_double(first.dead_fractions[l - 1].mean),
                       format_double(last.dead_fractions[l - 1].mean)});
    }
  }
  files["census_layers.csv"] = summary.str();
  files["trials.csv"] = trial_records_csv(result.trials.trials).str();
  return files;
}

OutputFiles render_size_heatmap(const ExperimentConfig& config, const SizeHeatmapResult& result) {
  OutputFiles files;
  CsvTable ref({"n", "reference_sum_sq"});
  for (std::size_t i = 0; i < result.sizes.size(); ++i) {
    ref.add_row({u(result.sizes[i]), format_double(result.reference[i])});
  }
  files["reference.csv"] = ref.str();
  CsvTable batches({"n", "policy", "batches_per_epoch"});
  for (std::size_t i = 0; i < result.sizes.size(); ++i) {
    batches.add_row({u(result.sizes[i]), result.batching[i], u(result.batches_per_epoch[i])});
  }
  files["batches.csv"] = batches.str();

  for (const auto& d : result.depths) {
    const std::string tag = "depth" + u(d.depth);
    files["size_" + tag + ".csv"] = heatmap_csv(d.size).str();
    files["mse_" + tag + ".csv"] = heatmap_csv(d.mse).str();
    files["size_" + tag + ".svg"] =
        render_heatmap(d.size, {config.experiment + " size, depth " + u(d.depth), 12, 24});
    files["mse_" + tag + ".svg"] =
        render_heatmap(d.mse, {config.experiment + " mse, depth " + u(d.depth), 12, 24});
    CsvTable trials({"n", "trial", "epoch", "mse", "size"});
    for (std::size_t i = 0; i < d.per_size.size(); ++i) {
      for (const auto& rec : d.per_size[i].trials) {
        for (const auto& cp : rec.checkpoints) {
          trials.add_row({u(result.sizes[i]), u(rec.trial), u(cp.epoch), format_double(cp.train_mse),
                          format_double(cp.size)});
        }
      }
    }
    files["trials_" + tag + ".csv"] = trials.str();
  }
  return files;
}

OutputFiles render_stuck(const ExperimentConfig&, const StuckResult& result) {
  OutputFiles files;
  CsvTable data({"x", "y"});
  for (std::size_t i = 0; i < result.data.x.rows(); ++i) {
    data.add_row({format_double(result.data.x(i, 0)), format_double(result.data.y(i, 0))});
  }
  files["data.csv"] = data.str();
  files["target.csv"] = grid_table(result.grid, result.target_on_grid);
  CsvTable pieces({"trial", "epoch", "train_mse", "pieces", "knots"});
  for (const auto& d : result.dumps) {
    const std::string tag = "trial" + u(d.trial) + "_epoch" + u(d.epoch);
    files["function_" + tag + ".csv"] = grid_table(result.grid, d.on_grid);
    files["pwl_" + tag + ".csv"] = pwl_csv(d.pwl).str();
    pieces.add_row({u(d.trial), u(d.epoch), format_double(d.train_mse), u(d.pieces),
                    u(d.pwl.breakpoints().size())});
  }
  files["pieces.csv"] = pieces.str();
  files["trials.csv"] = trial_records_csv(result.records).str();
  return files;
}

OutputFiles render_linearity(const ExperimentConfig&, const LinearityResult& result) {
  OutputFiles files;
  CsvTable data({"x", "clean", "noise", "noisy"});
  for (std::size_t i = 0; i < result.data.x.rows(); ++i) {
    data.add_row({format_double(result.data.x(i, 0)), format_double(result.data.clean(i, 0)),
                  format_double(result.data.noise(i, 0)), format_double(result.data.noisy(i, 0))});
  }
  files["data.csv"] = data.str();
  files["spline.csv"] = pwl_csv(result.spline).str();
  files["decomposition.csv"] = decomposition_csv(result.decomposition).str();
  for (std::size_t c = 0; c < result.decomposition.epochs.size(); ++c) {
    files["functions_epoch_" + u(result.decomposition.epochs[c]) + ".csv"] =
        decomposition_functions_csv(result.decomposition, c).str();
  }
  if (result.boost) {
    const BoostResult& b = *result.boost;
    CsvTable curve({"epoch", "mse_vs_noise"});
    for (std::size_t i = 0; i < b.epochs.size(); ++i) {
      curve.add_row({u(b.epochs[i]), format_double(b.mse_vs_noise[i])});
    }
    files["boost.csv"] = curve.str();
    CsvTable fn({"x", "trained", "carrier", "fit"});
    for (std::size_t i = 0; i < b.grid.size(); ++i) {
      fn.add_row({format_double(b.grid[i]), format_double(b.trained_on_grid[i]),
                  format_double(b.carrier_on_grid[i]), format_double(b.fit_on_grid[i])});
    }
    files["boost_function.csv"] = fn.str();
  }
  return files;
}

OutputFiles experiment_files(const ExperimentConfig& config) {
  config.validate();
  const std::string& e = config.experiment;
  if (e == "degenerate") return render_degenerate(config, run_degenerate(config));
  if (e == "size-heatmap" || e == "size-heatmap-batched") {
    return render_size_heatmap(config, run_size_heatmap(config));
  }
  if (e == "stuck") return render_stuck(config, run_stuck(config));
  return render_linearity(config, run_linearity(config));
}

std::string manifest_text(const ExperimentConfig& config, const OutputFiles& files) {
  std::ostringstream m;
  m << "manifest_format=1\n";
  m << "library_version=" << kLibraryVersion << "\n";
  m << "config_version=" << config.config_version << "\n";
  m << "experiment=" << config.experiment << "\n";
  m << "tier=" << config.tier << "\n";
  m << "base_seed=" << config.base_seed << "\n";
  m << "n_trials=" << config.n_trials << "\n";
  m << "trial_seeds=" << config.base_seed << ".." << config.base_seed + config.n_trials - 1 << "\n";
  m << "config_file=config.json\n";
  for (const auto& [name, contents] : files) {
    m << "file=" << name << " bytes=" << contents.size() << " fnv1a64=" << fnv1a64(contents) << "\n";
  }
  return m.str();
}

RunSummary run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec || !fs::is_directory(config.output_dir)) {
    throw std::runtime_error("cannot create output directory '" + config.output_dir + "'");
  }
  OutputFiles files = experiment_files(config);
  files["config.json"] = serialize_config(config);
  const std::string manifest = manifest_text(config, files);
  RunSummary summary;
  summary.output_dir = config.output_dir;
  for (const auto& [name, contents] : files) {
    const std::string path = (fs::path(config.output_dir) / name).string();
    write_text_file(path, contents);
    summary.files.push_back(path);
  }
  const std::string manifest_path = (fs::path(config.output_dir) / "manifest.txt").string();
  write_text_file(manifest_path, manifest);
  summary.files.push_back(manifest_path);
  return summary;
}

}  // namespace reluspline
