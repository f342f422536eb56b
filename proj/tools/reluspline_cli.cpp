#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reluspline/analysis.hpp"
#include "reluspline/config.hpp"
#include "reluspline/decomposition.hpp"
#include "reluspline/harness.hpp"
#include "reluspline/heatmap.hpp"
#include "reluspline/network.hpp"
#include "reluspline/optim.hpp"
#include "reluspline/pwl.hpp"

using namespace reluspline;

namespace {

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(parse_double(tok));
    } catch (const std::exception&) {
      throw std::invalid_argument(flag + ": cannot parse '" + tok + "' as a number");
    }
  }
  if (out.empty()) throw std::invalid_argument(flag + ": empty list");
  return out;
}

void emit(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_text_file(path, contents);
  }
}

struct ExperimentArgs {
  std::string name;
  std::string config;
  std::string tier = "desk";
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string out;
};

int run_experiment_cmd(const ExperimentArgs& a) {
  ExperimentConfig cfg = a.config.empty() ? default_config(a.name, a.tier) : load_config(a.config);
  if (cfg.experiment != a.name) {
    throw ConfigError("experiment", "config file is for '" + cfg.experiment + "', not '" + a.name + "'");
  }
  if (a.trials) cfg.n_trials = *a.trials;
  if (a.seed) cfg.base_seed = *a.seed;
  if (a.workers) cfg.workers = *a.workers;
  if (!a.out.empty()) cfg.output_dir = a.out;
  cfg.validate();
  const RunSummary s = run_experiment(cfg);
  std::cout << "wrote " << s.files.size() << " files to " << s.output_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::size_t inputs = 1;
  std::size_t width = 32;
  std::size_t depth = 2;
  std::size_t outputs = 1;
  std::string data = "normal";
  std::size_t points = 256;
  std::size_t teeth = 16;
  std::size_t knots = 8;
  double noise = 0.3;
  std::size_t epochs = 1000;
  std::size_t snapshot_every = 100;
  std::string batch = "full";
  std::size_t batch_size = 32;
  std::size_t steps_per_epoch = 1;
  bool no_shuffle = false;
  double lr = 1.0;
  double rho = 0.95;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  std::string save;
  std::string log;
};

int train_cmd(const TrainArgs& a) {
  Matrix x;
  Matrix y;
  RngStream rng(derive_seed(a.seed, kDataStream));
  if (a.data == "normal") {
    x = standard_normal(rng, a.points, a.inputs);
    y = standard_normal(rng, a.points, a.outputs);
  } else if (a.data == "sawtooth" || a.data == "spline") {
    if (a.inputs != 1 || a.outputs != 1) {
      throw std::invalid_argument("--data " + a.data + " needs --inputs 1 --outputs 1");
    }
    if (a.data == "sawtooth") {
      Dataset1d d = sawtooth_dataset(a.points, a.teeth, {-1.0, 1.0});
      x = d.x;
      y = d.y;
    } else {
      const PwlFunction s = random_linear_spline(a.knots, {-1.0, 1.0}, rng);
      SplineNoiseData d = spline_plus_noise(s, a.points, a.noise, rng);
      x = d.x;
      y = d.noisy;
    }
  } else {
    throw std::invalid_argument("--data: expected normal, sawtooth or spline, got '" + a.data + "'");
  }
  BatchSpec spec{a.batch, a.batch_size, a.steps_per_epoch, 0};
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.snapshot_every = a.snapshot_every;
  tc.shuffle_each_epoch = !a.no_shuffle;
  tc.batch_policy = spec.policy_for(a.points);
  tc.seed = a.seed;
  tc.adadelta = {a.lr, a.rho, a.epsilon};
  tc.record_census = true;
  NetworkShape shape{a.inputs, a.width, a.depth, a.outputs};
  MlpNetwork net = init_for_trial(shape.layer_sizes(), a.seed);
  const TrialRecord rec = train(net, x, y, tc);
  if (!a.log.empty()) trial_records_csv({rec}).write(a.log);
  if (!a.save.empty()) save_network(net, a.save);
  const Checkpoint& last = rec.checkpoints.back();
  std::cout << "epochs=" << last.epoch << " steps=" << rec.gradient_steps << " mse=" << format_double(last.train_mse)
            << " size=" << format_double(last.size) << "\n";
  if (rec.diverged) {
    std::cerr << "error: training diverged: " << rec.divergence_reason << "\n";
    return 2;
  }
  return 0;
}

struct ProbeArgs {
  std::string net;
  std::size_t points = 1000;
  std::uint64_t seed = 0;
  std::string out;
};

Matrix probe_inputs(const MlpNetwork& net, const ProbeArgs& a) {
  RngStream rng(a.seed);
  return standard_normal(rng, a.points, net.input_dim());
}

int census_cmd(const ProbeArgs& a) {
  const MlpNetwork net = load_network(a.net);
  emit(a.out, census_csv(dead_neuron_census(net, probe_inputs(net, a))).str());
  return 0;
}

int size_cmd(const ProbeArgs& a) {
  const MlpNetwork net = load_network(a.net);
  std::cout << format_double(size_metric(net, probe_inputs(net, a))) << "\n";
  return 0;
}

struct PwlArgs {
  std::string net;
  double lo = -1.0;
  double hi = 1.0;
  std::string line;
  double tol = kDefaultSlopeTolerance;
  std::string out;
};

int pwl_cmd(const PwlArgs& a) {
  MlpNetwork net = load_network(a.net);
  if (net.output_dim() != 1) throw std::invalid_argument("pwl extract: network must have one output");
  if (!a.line.empty()) {
    const auto colon = a.line.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("--line: expected BASE:DIRECTION, e.g. 0,0,0:1,0,0");
    }
    const auto base = parse_list(a.line.substr(0, colon), "--line base");
    const auto dir = parse_list(a.line.substr(colon + 1), "--line direction");
    net = restrict_to_line(net, base, dir).network;
  } else if (net.input_dim() != 1) {
    throw std::invalid_argument("pwl extract: network has " + std::to_string(net.input_dim()) +
                                " inputs; pass --line BASE:DIRECTION to restrict it to a line");
  }
  const PwlFunction pwl = extract_pwl(net, a.lo, a.hi);
  emit(a.out, pwl_csv(pwl).str());
  std::cerr << "pieces=" << count_pieces(pwl, a.tol) << " knots=" << pwl.breakpoints().size() << "\n";
  return 0;
}

struct PlotArgs {
  std::string csv;
  std::string out;
  std::string title;
  std::optional<double> lo;
  std::optional<double> hi;
};

int plot_cmd(const PlotArgs& a) {
  HeatmapGrid grid = parse_heatmap_csv(read_text_file(a.csv));
  grid.lo = a.lo;
  grid.hi = a.hi;
  HeatmapStyle style;
  style.title = a.title;
  emit(a.out, render_heatmap(grid, style));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train small ReLU networks and reproduce the spline experiments.", "reluspline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kLibraryVersion);

  std::function<int()> action;

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run configured experiments");
  exp->require_subcommand(1);
  ExperimentArgs ea;
  auto* run = exp->add_subcommand("run", "Run one experiment and write its outputs");
  run->add_option("name", ea.name, "Experiment name")->required()->check(CLI::IsMember(experiment_names()));
  run->add_option("--config", ea.config, "Config file (JSON); default: built-in config of --tier");
  run->add_option("--tier", ea.tier, "Built-in tier when --config is absent")->check(CLI::IsMember({"desk", "paper"}));
  run->add_option("--trials", ea.trials, "Override n_trials");
  run->add_option("--seed", ea.seed, "Override base_seed");
  run->add_option("--workers", ea.workers, "Worker threads (0 = all cores)");
  run->add_option("--out", ea.out, "Output directory");
  run->callback([&] { action = [&] { return run_experiment_cmd(ea); }; });
  auto* list = exp->add_subcommand("list", "List experiment names");
  list->callback([&] {
    action = [] {
      for (const auto& n : experiment_names()) std::cout << n << "\n";
      return 0;
    };
  });

  // config
  auto* cfg = app.add_subcommand("config", "Inspect experiment configs");
  cfg->require_subcommand(1);
  std::string show_name;
  std::string show_tier = "desk";
  auto* show = cfg->add_subcommand("show", "Print a built-in config");
  show->add_option("name", show_name, "Experiment name")->required()->check(CLI::IsMember(experiment_names()));
  show->add_option("--tier", show_tier, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  show->callback([&] {
    action = [&] {
      std::cout << serialize_config(default_config(show_name, show_tier));
      return 0;
    };
  });
  std::string check_path;
  auto* check = cfg->add_subcommand("check", "Validate a config file");
  check->add_option("file", check_path, "Config file")->required();
  check->callback([&] {
    action = [&] {
      const ExperimentConfig c = load_config(check_path);
      std::cout << "ok: " << c.experiment << " (" << c.tier << ")\n";
      return 0;
    };
  });

  // train
  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a single network");
  tr->add_option("--inputs", ta.inputs, "Input dimension")->capture_default_str();
  tr->add_option("--width", ta.width, "Hidden width")->capture_default_str();
  tr->add_option("--depth", ta.depth, "Hidden layers")->capture_default_str();
  tr->add_option("--outputs", ta.outputs, "Output dimension")->capture_default_str();
  tr->add_option("--data", ta.data, "normal | sawtooth | spline")->capture_default_str();
  tr->add_option("--points", ta.points, "Training points")->capture_default_str();
  tr->add_option("--teeth", ta.teeth, "Sawtooth teeth on [-1, 1]")->capture_default_str();
  tr->add_option("--knots", ta.knots, "Spline knots on [-1, 1]")->capture_default_str();
  tr->add_option("--noise", ta.noise, "Spline noise standard deviation")->capture_default_str();
  tr->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str();
  tr->add_option("--snapshot-every", ta.snapshot_every, "Checkpoint cadence")->capture_default_str();
  tr->add_option("--batch", ta.batch, "full | fixed-remainder | fixed-drop | random")->capture_default_str();
  tr->add_option("--batch-size", ta.batch_size, "Batch size")->capture_default_str();
  tr->add_option("--steps-per-epoch", ta.steps_per_epoch, "Steps per epoch for random batches")
      ->capture_default_str();
  tr->add_flag("--no-shuffle", ta.no_shuffle, "Keep sample order fixed across epochs");
  tr->add_option("--lr", ta.lr, "Adadelta learning rate")->capture_default_str();
  tr->add_option("--rho", ta.rho, "Adadelta decay")->capture_default_str();
  tr->add_option("--epsilon", ta.epsilon, "Adadelta epsilon")->capture_default_str();
  tr->add_option("--seed", ta.seed, "Seed for init, data and batching")->capture_default_str();
  tr->add_option("--save", ta.save, "Write the trained network here");
  tr->add_option("--log", ta.log, "Write checkpoint metrics (CSV) here");
  tr->callback([&] { action = [&] { return train_cmd(ta); }; });

  // census / size
  ProbeArgs ca;
  auto* census = app.add_subcommand("census", "Dead-unit census of a saved network on Gaussian inputs");
  census->add_option("--net", ca.net, "Saved network")->required();
  census->add_option("--points", ca.points, "Sample count")->capture_default_str();
  census->add_option("--seed", ca.seed, "Sample seed")->capture_default_str();
  census->add_option("--out", ca.out, "CSV path (default stdout)");
  census->callback([&] { action = [&] { return census_cmd(ca); }; });

  ProbeArgs sa;
  auto* size = app.add_subcommand("size", "Sum of squared outputs of a saved network on Gaussian inputs");
  size->add_option("--net", sa.net, "Saved network")->required();
  size->add_option("--points", sa.points, "Sample count")->capture_default_str();
  size->add_option("--seed", sa.seed, "Sample seed")->capture_default_str();
  size->callback([&] { action = [&] { return size_cmd(sa); }; });

  // pwl
  auto* pwl = app.add_subcommand("pwl", "Piecewise-linear tools");
  pwl->require_subcommand(1);
  PwlArgs pa;
  auto* extract = pwl->add_subcommand("extract", "Exact breakpoints of a 1-output network on [lo, hi]");
  extract->add_option("--net", pa.net, "Saved network")->required();
  extract->add_option("--lo", pa.lo, "Interval start")->capture_default_str();
  extract->add_option("--hi", pa.hi, "Interval end")->capture_default_str();
  extract->add_option("--line", pa.line, "BASE:DIRECTION, restricts a multi-input net to base + t*direction");
  extract->add_option("--tol", pa.tol, "Slope tolerance for the piece count")->capture_default_str();
  extract->add_option("--out", pa.out, "CSV path (default stdout)");
  extract->callback([&] { action = [&] { return pwl_cmd(pa); }; });

  // plot
  auto* plot = app.add_subcommand("plot", "Plotting");
  plot->require_subcommand(1);
  PlotArgs pl;
  auto* heat = plot->add_subcommand("heatmap", "Render a heatmap CSV to SVG");
  heat->add_option("csv", pl.csv, "Heatmap CSV (first column row labels, header column labels)")->required();
  heat->add_option("--out", pl.out, "SVG path (default stdout)");
  heat->add_option("--title", pl.title, "Title");
  heat->add_option("--min", pl.lo, "Colour scale lower bound");
  heat->add_option("--max", pl.hi, "Colour scale upper bound");
  heat->callback([&] { action = [&] { return plot_cmd(pl); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
