#include "reluspline/config.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <json.hpp>

#include "reluspline/format.hpp"

namespace reluspline {

namespace {

using Json = nlohmann::ordered_json;

bool is_size_experiment(const std::string& name) {
  return name == "size-heatmap" || name == "size-heatmap-batched";
}

std::set<std::string> data_keys(const std::string& name) {
  if (name == "degenerate") return {"n_points", "census_layers"};
  if (is_size_experiment(name)) return {"sizes", "depths"};
  if (name == "stuck") return {"n_points", "n_teeth", "domain", "grid_points"};
  return {"n_points", "n_knots", "domain", "noise_ratio", "grid_points"};
}

std::set<std::string> top_keys(const std::string& name) {
  std::set<std::string> keys{"experiment", "tier",  "config_version", "base_seed", "n_trials",
                             "workers",    "output_dir", "network",     "train",     "data"};
  if (name == "linearity") keys.insert("boost");
  return keys;
}

std::set<std::string> network_keys(const std::string& name) {
  if (is_size_experiment(name)) return {"inputs", "width", "outputs"};
  return {"inputs", "width", "depth", "outputs"};
}

void reject_unknown(const Json& obj, const std::string& path, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::uint64_t as_uint(const Json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  throw ConfigError(key, "expected a non-negative integer, got " + v.dump());
}

double as_double(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number, got " + v.dump());
  return v.get<double>();
}

template <typename T>
void read_uint(const Json& obj, const std::string& path, const char* key, T& out) {
  if (obj.contains(key)) {
    const std::uint64_t v = as_uint(obj.at(key), join(path, key));
    if (v > std::numeric_limits<T>::max()) throw ConfigError(join(path, key), "value out of range");
    out = static_cast<T>(v);
  }
}

void read_double(const Json& obj, const std::string& path, const char* key, double& out) {
  if (obj.contains(key)) out = as_double(obj.at(key), join(path, key));
}

void read_bool(const Json& obj, const std::string& path, const char* key, bool& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(join(path, key), "expected true or false, got " + v.dump());
  out = v.get<bool>();
}

void read_string(const Json& obj, const std::string& path, const char* key, std::string& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "expected a string, got " + v.dump());
  out = v.get<std::string>();
}

void read_uint_list(const Json& obj, const std::string& path, const char* key,
                    std::vector<std::size_t>& out) {
  if (!obj.contains(key)) return;
  const Json& v = obj.at(key);
  const std::string name = join(path, key);
  if (!v.is_array()) throw ConfigError(name, "expected a list of non-negative integers");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(static_cast<std::size_t>(as_uint(v[i], name + "[" + std::to_string(i) + "]")));
  }
}

void require_increasing(const std::vector<std::size_t>& v, const std::string& key) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= v[i - 1]) throw ConfigError(key, "values must be strictly increasing");
  }
}

Json uint_list(const std::vector<std::size_t>& v) {
  Json arr = Json::array();
  for (std::size_t x : v) arr.push_back(x);
  return arr;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"degenerate", "size-heatmap", "size-heatmap-batched",
                                              "stuck", "linearity"};
  return names;
}

std::vector<std::size_t> NetworkShape::layer_sizes() const { return layer_sizes(depth); }

std::vector<std::size_t> NetworkShape::layer_sizes(std::size_t d) const {
  std::vector<std::size_t> sizes{inputs};
  for (std::size_t i = 0; i < d; ++i) sizes.push_back(width);
  sizes.push_back(outputs);
  return sizes;
}

BatchPolicy BatchSpec::policy_for(std::size_t n_points) const {
  if (policy == "full" || n_points < min_points) return FullBatch{};
  if (policy == "fixed-remainder") return FixedWithRemainder{size};
  if (policy == "fixed-drop") return FixedDropRemainder{size};
  if (policy == "random") return RandomSample{size, steps_per_epoch};
  throw ConfigError("train.batch.policy", "unknown policy '" + policy + "'");
}

void ExperimentConfig::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end()) {
    throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  }
  if (tier != "desk" && tier != "paper") throw ConfigError("tier", "expected 'desk' or 'paper'");
  if (config_version != kConfigVersion) {
    throw ConfigError("config_version", "unsupported version " + std::to_string(config_version));
  }
  if (n_trials == 0) throw ConfigError("n_trials", "must be at least 1");
  if (network.inputs == 0) throw ConfigError("network.inputs", "must be at least 1");
  if (network.outputs == 0) throw ConfigError("network.outputs", "must be at least 1");
  if (network.width == 0) throw ConfigError("network.width", "must be at least 1");
  if (!is_size_experiment(experiment) && network.depth == 0) {
    throw ConfigError("network.depth", "must be at least 1");
  }
  if (train.epochs == 0) throw ConfigError("train.epochs", "must be at least 1");
  if (train.snapshot_every == 0) throw ConfigError("train.snapshot_every", "must be at least 1");
  for (std::size_t i = 0; i < train.checkpoints.size(); ++i) {
    if (train.checkpoints[i] > train.epochs) {
      throw ConfigError("train.checkpoints[" + std::to_string(i) + "]", "exceeds train.epochs");
    }
  }
  require_increasing(train.checkpoints, "train.checkpoints");
  const std::string& p = train.batch.policy;
  if (p != "full" && p != "fixed-remainder" && p != "fixed-drop" && p != "random") {
    throw ConfigError("train.batch.policy",
                      "expected full, fixed-remainder, fixed-drop or random, got '" + p + "'");
  }
  if (p != "full" && train.batch.size == 0) throw ConfigError("train.batch.size", "must be at least 1");
  if (p == "random" && train.batch.steps_per_epoch == 0) {
    throw ConfigError("train.batch.steps_per_epoch", "must be at least 1");
  }
  if (!(train.adadelta.lr > 0.0)) throw ConfigError("train.adadelta.lr", "must be positive");
  if (!(train.adadelta.rho >= 0.0 && train.adadelta.rho < 1.0)) {
    throw ConfigError("train.adadelta.rho", "must lie in [0, 1)");
  }
  if (!(train.adadelta.epsilon > 0.0)) throw ConfigError("train.adadelta.epsilon", "must be positive");

  if (experiment == "degenerate") {
    if (data.n_points == 0) throw ConfigError("data.n_points", "must be at least 1");
    for (std::size_t i = 0; i < data.census_layers.size(); ++i) {
      const std::size_t l = data.census_layers[i];
      if (l == 0 || l > network.depth) {
        throw ConfigError("data.census_layers[" + std::to_string(i) + "]",
                          "must name a hidden layer in 1.." + std::to_string(network.depth));
      }
    }
  } else if (is_size_experiment(experiment)) {
    if (data.sizes.empty()) throw ConfigError("data.sizes", "must not be empty");
    if (data.depths.empty()) throw ConfigError("data.depths", "must not be empty");
    require_increasing(data.sizes, "data.sizes");
    require_increasing(data.depths, "data.depths");
    if (data.sizes.front() == 0) throw ConfigError("data.sizes[0]", "must be at least 1");
    if (data.depths.front() == 0) throw ConfigError("data.depths[0]", "must be at least 1");
  } else {
    if (network.inputs != 1 || network.outputs != 1) {
      throw ConfigError("network.inputs", experiment + " needs a 1-input, 1-output network");
    }
    if (data.n_points < 2) throw ConfigError("data.n_points", "must be at least 2");
    if (!(data.domain.lo < data.domain.hi)) throw ConfigError("data.domain", "needs lo < hi");
    if (data.grid_points < 2) throw ConfigError("data.grid_points", "must be at least 2");
    if (experiment == "stuck" && data.n_teeth == 0) throw ConfigError("data.n_teeth", "must be at least 1");
    if (experiment == "linearity") {
      if (data.n_knots < 2) throw ConfigError("data.n_knots", "must be at least 2");
      if (!(data.noise_ratio >= 0.0)) throw ConfigError("data.noise_ratio", "must be >= 0");
    }
  }
}

TrainConfig ExperimentConfig::train_config(std::size_t n_points, std::uint64_t seed) const {
  TrainConfig c;
  c.epochs = train.epochs;
  c.snapshot_every = train.snapshot_every;
  c.shuffle_each_epoch = train.shuffle;
  c.checkpoints = train.checkpoints;
  c.batch_policy = train.batch.policy_for(n_points);
  c.adadelta = train.adadelta;
  c.seed = seed;
  return c;
}

ExperimentConfig default_config(const std::string& experiment, const std::string& tier) {
  if (tier != "desk" && tier != "paper") throw ConfigError("tier", "expected 'desk' or 'paper'");
  const bool paper = tier == "paper";
  ExperimentConfig c;
  c.experiment = experiment;
  c.tier = tier;
  c.output_dir = "out/" + experiment + "-" + tier;
  if (experiment == "degenerate") {
    // Same scale at both tiers; it runs in seconds.
    c.base_seed = 1000;
    c.n_trials = 10;
    c.network = {3, 64, 20, 1};
    c.train.epochs = 5;
    c.train.snapshot_every = 1;
    c.train.adadelta.lr = 0.001;
    c.data.n_points = 1000;
    c.data.census_layers = {3, 10, 20};
  } else if (experiment == "size-heatmap" || experiment == "size-heatmap-batched") {
    const bool batched = experiment == "size-heatmap-batched";
    c.base_seed = batched ? 11 : 7;
    c.network = {3, paper ? std::size_t{64} : std::size_t{16}, 0, 1};
    if (paper) {
      c.n_trials = 128;
      c.train.epochs = 50000;
      c.train.snapshot_every = 500;
      c.data.depths = {2, 3, 4};
      // Geometric, ratio 125^(1/7).
      c.data.sizes = {20, 40, 80, 159, 316, 631, 1258, 2500};
    } else if (batched) {
      c.n_trials = 4;
      c.train.epochs = 2000;
      c.train.snapshot_every = 100;
      c.data.depths = {2};
      c.data.sizes = {100, 400, 1030, 1200};
    } else {
      c.n_trials = 8;
      c.train.epochs = 5000;
      c.train.snapshot_every = 250;
      c.data.depths = {2, 3};
      c.data.sizes = {20, 50, 100, 200, 400};
    }
    if (batched) c.train.batch = {"fixed-remainder", 256, 0, 1024};
  } else if (experiment == "stuck") {
    c.base_seed = 3;
    c.n_trials = 2;
    c.network = {1, paper ? std::size_t{500} : std::size_t{64}, 4, 1};
    const std::size_t scale = paper ? 10 : 1;
    c.train.epochs = 2000 * scale;
    c.train.snapshot_every = 2000 * scale;
    c.train.checkpoints = {800 * scale, 1600 * scale, 2000 * scale};
    c.train.batch = {"fixed-remainder", 500, 0, 0};
    c.data.n_points = 1000;
    c.data.n_teeth = 16;
    c.data.domain = {-1.0, 1.0};
    c.data.grid_points = 2001;
  } else if (experiment == "linearity") {
    c.base_seed = 1;
    c.n_trials = 5;
    c.network = {1, 32, 4, 1};
    c.train.epochs = 4000;
    c.train.snapshot_every = 4000;
    c.train.checkpoints = {20, 100, 200, 1000, 2000, 4000};
    c.train.batch = {"fixed-remainder", 32, 0, 0};
    c.data.n_points = 64;
    c.data.n_knots = 8;
    c.data.domain = {-1.0, 1.0};
    c.data.noise_ratio = 0.3;
    c.data.grid_points = 512;
    c.boost = true;
  } else {
    throw ConfigError("experiment", "unknown experiment '" + experiment + "'");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("<root>", "expected an object");
  if (!doc.contains("experiment")) throw ConfigError("experiment", "missing required key");
  std::string name;
  read_string(doc, "", "experiment", name);
  std::string tier = "desk";
  read_string(doc, "", "tier", tier);
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw ConfigError("experiment", "unknown experiment '" + name + "'");
  }
  ExperimentConfig c = default_config(name, tier);
  reject_unknown(doc, "", top_keys(name));

  if (doc.contains("config_version")) {
    const std::uint64_t v = as_uint(doc.at("config_version"), "config_version");
    if (v != static_cast<std::uint64_t>(kConfigVersion)) {
      throw ConfigError("config_version", "unsupported version " + std::to_string(v));
    }
  }
  read_uint(doc, "", "base_seed", c.base_seed);
  read_uint(doc, "", "n_trials", c.n_trials);
  read_uint(doc, "", "workers", c.workers);
  read_string(doc, "", "output_dir", c.output_dir);
  read_bool(doc, "", "boost", c.boost);

  if (doc.contains("network")) {
    const Json& n = doc.at("network");
    reject_unknown(n, "network", network_keys(name));
    read_uint(n, "network", "inputs", c.network.inputs);
    read_uint(n, "network", "width", c.network.width);
    read_uint(n, "network", "depth", c.network.depth);
    read_uint(n, "network", "outputs", c.network.outputs);
  }
  if (doc.contains("train")) {
    const Json& t = doc.at("train");
    reject_unknown(t, "train", {"epochs", "snapshot_every", "shuffle", "checkpoints", "batch", "adadelta"});
    read_uint(t, "train", "epochs", c.train.epochs);
    read_uint(t, "train", "snapshot_every", c.train.snapshot_every);
    read_bool(t, "train", "shuffle", c.train.shuffle);
    read_uint_list(t, "train", "checkpoints", c.train.checkpoints);
    if (t.contains("batch")) {
      const Json& b = t.at("batch");
      reject_unknown(b, "train.batch", {"policy", "size", "steps_per_epoch", "min_points"});
      read_string(b, "train.batch", "policy", c.train.batch.policy);
      read_uint(b, "train.batch", "size", c.train.batch.size);
      read_uint(b, "train.batch", "steps_per_epoch", c.train.batch.steps_per_epoch);
      read_uint(b, "train.batch", "min_points", c.train.batch.min_points);
    }
    if (t.contains("adadelta")) {
      const Json& a = t.at("adadelta");
      reject_unknown(a, "train.adadelta", {"lr", "rho", "epsilon"});
      read_double(a, "train.adadelta", "lr", c.train.adadelta.lr);
      read_double(a, "train.adadelta", "rho", c.train.adadelta.rho);
      read_double(a, "train.adadelta", "epsilon", c.train.adadelta.epsilon);
    }
  }
  if (doc.contains("data")) {
    const Json& d = doc.at("data");
    reject_unknown(d, "data", data_keys(name));
    read_uint(d, "data", "n_points", c.data.n_points);
    read_uint(d, "data", "n_teeth", c.data.n_teeth);
    read_uint(d, "data", "n_knots", c.data.n_knots);
    read_uint(d, "data", "grid_points", c.data.grid_points);
    read_double(d, "data", "noise_ratio", c.data.noise_ratio);
    read_uint_list(d, "data", "sizes", c.data.sizes);
    read_uint_list(d, "data", "depths", c.data.depths);
    read_uint_list(d, "data", "census_layers", c.data.census_layers);
    if (d.contains("domain")) {
      const Json& dom = d.at("domain");
      if (!dom.is_array() || dom.size() != 2) throw ConfigError("data.domain", "expected [lo, hi]");
      c.data.domain = {as_double(dom[0], "data.domain[0]"), as_double(dom[1], "data.domain[1]")};
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception&) {
    throw ConfigError("<file>", "cannot read '" + path + "'");
  }
  return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& c) {
  const std::string& name = c.experiment;
  Json doc;
  doc["experiment"] = name;
  doc["tier"] = c.tier;
  doc["config_version"] = c.config_version;
  doc["base_seed"] = c.base_seed;
  doc["n_trials"] = c.n_trials;
  doc["workers"] = c.workers;
  doc["output_dir"] = c.output_dir;
  Json net;
  net["inputs"] = c.network.inputs;
  net["width"] = c.network.width;
  if (!is_size_experiment(name)) net["depth"] = c.network.depth;
  net["outputs"] = c.network.outputs;
  doc["network"] = net;

  Json train;
  train["epochs"] = c.train.epochs;
  train["snapshot_every"] = c.train.snapshot_every;
  train["shuffle"] = c.train.shuffle;
  train["checkpoints"] = uint_list(c.train.checkpoints);
  Json batch;
  batch["policy"] = c.train.batch.policy;
  batch["size"] = c.train.batch.size;
  batch["steps_per_epoch"] = c.train.batch.steps_per_epoch;
  batch["min_points"] = c.train.batch.min_points;
  train["batch"] = batch;
  Json ada;
  ada["lr"] = c.train.adadelta.lr;
  ada["rho"] = c.train.adadelta.rho;
  ada["epsilon"] = c.train.adadelta.epsilon;
  train["adadelta"] = ada;
  doc["train"] = train;

  Json data;
  const auto keys = data_keys(name);
  if (keys.count("n_points")) data["n_points"] = c.data.n_points;
  if (keys.count("n_teeth")) data["n_teeth"] = c.data.n_teeth;
  if (keys.count("n_knots")) data["n_knots"] = c.data.n_knots;
  if (keys.count("domain")) data["domain"] = Json::array({c.data.domain.lo, c.data.domain.hi});
  if (keys.count("noise_ratio")) data["noise_ratio"] = c.data.noise_ratio;
  if (keys.count("grid_points")) data["grid_points"] = c.data.grid_points;
  if (keys.count("sizes")) data["sizes"] = uint_list(c.data.sizes);
  if (keys.count("depths")) data["depths"] = uint_list(c.data.depths);
  if (keys.count("census_layers")) data["census_layers"] = uint_list(c.data.census_layers);
  doc["data"] = data;
  if (name == "linearity") doc["boost"] = c.boost;
  return doc.dump(2) + "\n";
}

}  // namespace reluspline
