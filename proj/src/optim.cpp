#include "reluspline/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "reluspline/analysis.hpp"

namespace reluspline {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void ensure_state_shape(std::span<const ParameterBlock> params, AdadeltaState& state) {
  if (state.mean_sq_grad.empty()) {
    for (const auto& block : params) {
      state.mean_sq_grad.emplace_back(block.values.size(), 0.0);
      state.mean_sq_update.emplace_back(block.values.size(), 0.0);
    }
    return;
  }
  if (state.mean_sq_grad.size() != params.size()) {
    throw ShapeError("adadelta_step: optimizer state has a different block count");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.mean_sq_grad[b].size() != params[b].values.size()) {
      throw ShapeError("adadelta_step: optimizer state shape differs for " + params[b].name);
    }
  }
}

Checkpoint measure(const MlpNetwork& net, const Matrix& x, const Matrix& y, std::size_t epoch,
                   const TrainConfig& config) {
  Checkpoint cp;
  cp.epoch = epoch;
  if (config.record_census) {
    const ForwardTrace trace = forward(net, x);
    cp.train_mse = mse(trace.output(), y);
    if (config.record_size) cp.size = perfect_fit_reference(trace.output());
    cp.dead_fractions = dead_neuron_census(trace).dead_fractions();
  } else {
    const Matrix out = predict(net, x);
    cp.train_mse = mse(out, y);
    if (config.record_size) cp.size = perfect_fit_reference(out);
  }
  return cp;
}

bool finite_checkpoint(const Checkpoint& cp) {
  return std::isfinite(cp.train_mse) && std::isfinite(cp.size);
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace

void adadelta_step(std::span<const ParameterBlock> params, std::span<const ParameterBlock> grads,
                   AdadeltaState& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adadelta_step: parameter and gradient block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size()) {
      throw ShapeError("adadelta_step: gradient shape differs for " + params[b].name);
    }
    require_finite(grads[b].values, "gradient block " + grads[b].name);
  }
  ensure_state_shape(params, state);

  const auto& cfg = state.config;
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b].values;
    const auto g = grads[b].values;
    auto& eg2 = state.mean_sq_grad[b];
    auto& edx2 = state.mean_sq_update[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      eg2[i] = cfg.rho * eg2[i] + (1.0 - cfg.rho) * g[i] * g[i];
      const double delta = -std::sqrt(edx2[i] + cfg.epsilon) / std::sqrt(eg2[i] + cfg.epsilon) * g[i];
      edx2[i] = cfg.rho * edx2[i] + (1.0 - cfg.rho) * delta * delta;
      p[i] += cfg.lr * delta;
    }
  }
  ++state.steps;
}

void adadelta_step(MlpNetwork& net, MlpGradients& grads, AdadeltaState& state) {
  const auto params = net.parameter_blocks();
  const auto g = grads.parameter_blocks();
  adadelta_step(params, g, state);
}

void validate(const BatchPolicy& policy) {
  std::visit(Overloaded{
                 [](const FullBatch&) {},
                 [](const FixedWithRemainder& p) {
                   if (p.size == 0) throw std::invalid_argument("batch size must be >= 1");
                 },
                 [](const FixedDropRemainder& p) {
                   if (p.size == 0) throw std::invalid_argument("batch size must be >= 1");
                 },
                 [](const RandomSample& p) {
                   if (p.size == 0) throw std::invalid_argument("batch size must be >= 1");
                   if (p.steps_per_epoch == 0) {
                     throw std::invalid_argument("steps_per_epoch must be >= 1");
                   }
                 },
             },
             policy);
}

std::string describe(const BatchPolicy& policy) {
  return std::visit(
      Overloaded{
          [](const FullBatch&) { return std::string("full"); },
          [](const FixedWithRemainder& p) { return "fixed-remainder(" + std::to_string(p.size) + ")"; },
          [](const FixedDropRemainder& p) { return "fixed-drop(" + std::to_string(p.size) + ")"; },
          [](const RandomSample& p) {
            return "random(" + std::to_string(p.size) + "," + std::to_string(p.steps_per_epoch) + ")";
          },
      },
      policy);
}

std::size_t batches_per_epoch(const BatchPolicy& policy, std::size_t n) {
  validate(policy);
  return std::visit(Overloaded{
                        [](const FullBatch&) -> std::size_t { return 1; },
                        [n](const FixedWithRemainder& p) -> std::size_t {
                          return n / p.size + (n % p.size != 0 ? 1 : 0);
                        },
                        [n](const FixedDropRemainder& p) -> std::size_t { return n / p.size; },
                        [](const RandomSample& p) -> std::size_t { return p.steps_per_epoch; },
                    },
                    policy);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, const BatchPolicy& policy,
                                                   RngStream& rng, bool shuffle) {
  if (n == 0) throw std::invalid_argument("make_batches: empty dataset");
  validate(policy);

  auto ordered = [&] {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (shuffle) rng.shuffle(idx);
    return idx;
  };
  auto slice = [](const std::vector<std::size_t>& idx, std::size_t size, bool keep_remainder) {
    std::vector<std::vector<std::size_t>> batches;
    const std::size_t full = idx.size() / size;
    for (std::size_t b = 0; b < full; ++b) {
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(b * size),
                           idx.begin() + static_cast<std::ptrdiff_t>((b + 1) * size));
    }
    if (keep_remainder && idx.size() % size != 0) {
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(full * size), idx.end());
    }
    return batches;
  };

  return std::visit(
      Overloaded{
          [&](const FullBatch&) {
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            return std::vector<std::vector<std::size_t>>{std::move(idx)};
          },
          [&](const FixedWithRemainder& p) { return slice(ordered(), p.size, true); },
          [&](const FixedDropRemainder& p) { return slice(ordered(), p.size, false); },
          [&](const RandomSample& p) {
            std::vector<std::vector<std::size_t>> batches(p.steps_per_epoch);
            for (auto& batch : batches) {
              batch.resize(p.size);
              for (auto& i : batch) i = rng.next_index(n);
            }
            return batches;
          },
      },
      policy);
}

void TrainConfig::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (snapshot_every == 0) throw std::invalid_argument("snapshot_every must be >= 1");
  reluspline::validate(batch_policy);
  for (std::size_t e : checkpoints) {
    if (e > epochs) {
      throw std::invalid_argument("checkpoint epoch " + std::to_string(e) + " exceeds epochs " +
                                  std::to_string(epochs));
    }
  }
  if (!(adadelta.rho >= 0.0 && adadelta.rho < 1.0)) throw std::invalid_argument("rho must be in [0, 1)");
  if (!(adadelta.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(adadelta.lr > 0.0)) throw std::invalid_argument("lr must be > 0");
}

std::vector<std::size_t> TrainConfig::checkpoint_epochs() const {
  std::vector<std::size_t> epochs_out;
  for (std::size_t e = 0; e <= epochs; e += snapshot_every) epochs_out.push_back(e);
  epochs_out.insert(epochs_out.end(), checkpoints.begin(), checkpoints.end());
  epochs_out.push_back(epochs);
  std::sort(epochs_out.begin(), epochs_out.end());
  epochs_out.erase(std::unique(epochs_out.begin(), epochs_out.end()), epochs_out.end());
  return epochs_out;
}

TrialRecord train(MlpNetwork& net, const Matrix& x, const Matrix& y, const TrainConfig& config,
                  const CheckpointObserver& observer) {
  config.validate();
  net.validate();
  if (x.rows() != y.rows() || x.cols() != net.input_dim() || y.cols() != net.output_dim()) {
    throw ShapeError("train: data " + x.shape_string() + " -> " + y.shape_string() +
                     " does not fit the network");
  }
  if (x.rows() == 0) throw std::invalid_argument("train: empty dataset");

  TrialRecord record;
  record.seed = config.seed;
  RngStream rng(derive_seed(config.seed, 0x6261746368ULL));
  AdadeltaState state;
  state.config = config.adadelta;
  const bool full_batch = std::holds_alternative<FullBatch>(config.batch_policy);

  const auto schedule = config.checkpoint_epochs();
  auto next_checkpoint = schedule.begin();

  auto record_checkpoint = [&](std::size_t epoch) {
    Checkpoint cp = measure(net, x, y, epoch, config);
    if (!finite_checkpoint(cp)) {
      record.diverged = true;
      record.divergence_reason = "non-finite training loss at epoch " + std::to_string(epoch);
      return false;
    }
    record.checkpoints.push_back(cp);
    if (observer) observer(record.checkpoints.back(), net);
    return true;
  };

  if (!record_checkpoint(0)) return record;
  ++next_checkpoint;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto batches = make_batches(x.rows(), config.batch_policy, rng,
                                      config.shuffle_each_epoch && !full_batch);
    for (const auto& batch : batches) {
      try {
        MlpGradients grads = full_batch ? backprop(net, x, y)
                                        : backprop(net, x.select_rows(batch), y.select_rows(batch));
        if (!std::isfinite(grads.loss)) {
          throw NonFiniteError("non-finite batch loss");
        }
        adadelta_step(net, grads, state);
      } catch (const NonFiniteError& e) {
        record.diverged = true;
        record.divergence_reason = "epoch " + std::to_string(epoch) + ": " + e.what();
        return record;
      }
      ++record.gradient_steps;
    }
    if (next_checkpoint != schedule.end() && *next_checkpoint == epoch) {
      if (!record_checkpoint(epoch)) return record;
      ++next_checkpoint;
    }
  }
  return record;
}

AggregateRecord aggregate(std::vector<TrialRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const TrialRecord& a, const TrialRecord& b) { return a.trial < b.trial; });
  AggregateRecord out;
  const TrialRecord* reference = nullptr;
  for (const auto& r : records) {
    if (r.diverged) {
      out.diverged_trials.push_back(r.trial);
      continue;
    }
    if (reference == nullptr) {
      reference = &r;
    } else if (r.checkpoints.size() != reference->checkpoints.size()) {
      throw std::invalid_argument("aggregate: trials recorded different checkpoint schedules");
    }
    ++out.trials_used;
  }
  if (reference == nullptr) return out;

  for (std::size_t c = 0; c < reference->checkpoints.size(); ++c) {
    AggregateCheckpoint agg;
    agg.epoch = reference->checkpoints[c].epoch;
    std::vector<double> mses;
    std::vector<double> sizes;
    const std::size_t layers = reference->checkpoints[c].dead_fractions.size();
    std::vector<std::vector<double>> dead(layers);
    for (const auto& r : records) {
      if (r.diverged) continue;
      const auto& cp = r.checkpoints[c];
      if (cp.epoch != agg.epoch || cp.dead_fractions.size() != layers) {
        throw std::invalid_argument("aggregate: trials recorded different checkpoint schedules");
      }
      mses.push_back(cp.train_mse);
      sizes.push_back(cp.size);
      for (std::size_t l = 0; l < layers; ++l) dead[l].push_back(cp.dead_fractions[l]);
    }
    agg.mse = summarize(mses);
    agg.size = summarize(sizes);
    for (const auto& d : dead) agg.dead_fractions.push_back(summarize(d));
    out.checkpoints.push_back(std::move(agg));
  }
  return out;
}

TrialSet run_trials(std::uint64_t base_seed, std::size_t n_trials, const TrialRunner& runner,
                    std::size_t workers) {
  if (n_trials == 0) throw std::invalid_argument("run_trials: need at least one trial");
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n_trials);

  std::vector<TrialRecord> records(n_trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < n_trials; i = next++) {
      try {
        TrialRecord r = runner(i, base_seed + i);
        r.trial = i;
        r.seed = base_seed + i;
        records[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  TrialSet set;
  set.aggregate = aggregate(records);
  set.trials = std::move(records);
  return set;
}

CsvTable trial_records_csv(const std::vector<TrialRecord>& records) {
  std::size_t layers = 0;
  for (const auto& r : records)
    for (const auto& cp : r.checkpoints) layers = std::max(layers, cp.dead_fractions.size());
  std::vector<std::string> header{"trial", "epoch", "mse", "size"};
  for (std::size_t l = 1; l <= layers; ++l) header.push_back("dead_frac_layer_" + std::to_string(l));
  CsvTable table(std::move(header));
  for (const auto& r : records) {
    for (const auto& cp : r.checkpoints) {
      std::vector<std::string> row{std::to_string(r.trial), std::to_string(cp.epoch),
                                   format_double(cp.train_mse), format_double(cp.size)};
      for (std::size_t l = 0; l < layers; ++l) {
        row.push_back(l < cp.dead_fractions.size() ? format_double(cp.dead_fractions[l]) : "");
      }
      table.add_row(std::move(row));
    }
  }
  return table;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace reluspline
