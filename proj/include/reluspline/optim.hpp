#pragma once

// Adadelta, batching rules and the checkpointed training loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "reluspline/core.hpp"
#include "reluspline/format.hpp"
#include "reluspline/network.hpp"

namespace reluspline {

struct AdadeltaConfig {
  double lr = 1.0;
  double rho = 0.95;
  double epsilon = 1e-7;

  friend bool operator==(const AdadeltaConfig&, const AdadeltaConfig&) = default;
};

/// Running averages of squared gradients and squared updates, one array per
/// parameter block. Empty until the first step sizes them.
struct AdadeltaState {
  AdadeltaConfig config;
  std::vector<std::vector<double>> mean_sq_grad;
  std::vector<std::vector<double>> mean_sq_update;
  std::size_t steps = 0;
};

/// One Adadelta update over matching parameter and gradient blocks:
///   Eg2  <- rho Eg2 + (1 - rho) g^2
///   d    <- -sqrt(Edx2 + eps) / sqrt(Eg2 + eps) * g
///   Edx2 <- rho Edx2 + (1 - rho) d^2
///   p    <- p + lr d
/// A non-finite gradient throws NonFiniteError naming its block before any
/// parameter is touched.
void adadelta_step(std::span<const ParameterBlock> params, std::span<const ParameterBlock> grads,
                   AdadeltaState& state);
void adadelta_step(MlpNetwork& net, MlpGradients& grads, AdadeltaState& state);

struct FullBatch {};
struct FixedWithRemainder {
  std::size_t size = 0;
};
struct FixedDropRemainder {
  std::size_t size = 0;
};
struct RandomSample {
  std::size_t size = 0;
  std::size_t steps_per_epoch = 0;
};
using BatchPolicy = std::variant<FullBatch, FixedWithRemainder, FixedDropRemainder, RandomSample>;

void validate(const BatchPolicy& policy);
std::string describe(const BatchPolicy& policy);
std::size_t batches_per_epoch(const BatchPolicy& policy, std::size_t n);

/// Index lists for one epoch over n samples. With `shuffle`, the fixed-size
/// policies permute 0..n-1 before slicing; RandomSample always draws with
/// replacement; FullBatch ignores both and never touches `rng`.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, const BatchPolicy& policy,
                                                   RngStream& rng, bool shuffle);

struct TrainConfig {
  std::size_t epochs = 1;
  BatchPolicy batch_policy = FullBatch{};
  bool shuffle_each_epoch = true;
  std::size_t snapshot_every = 1;
  /// Extra epochs to checkpoint besides the regular cadence.
  std::vector<std::size_t> checkpoints;
  std::uint64_t seed = 0;
  bool record_census = false;
  bool record_size = true;
  AdadeltaConfig adadelta;

  void validate() const;
  /// Sorted epochs at which train() records metrics: 0, multiples of
  /// snapshot_every, the extra list, and the final epoch.
  std::vector<std::size_t> checkpoint_epochs() const;
};

struct Checkpoint {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double size = 0.0;
  std::vector<double> dead_fractions;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<Checkpoint> checkpoints;
  std::size_t gradient_steps = 0;
  bool diverged = false;
  std::string divergence_reason;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

/// Called after each checkpoint is recorded, with the network at that epoch.
using CheckpointObserver = std::function<void(const Checkpoint&, const MlpNetwork&)>;

/// Trains `net` in place with Adadelta. Checkpoint metrics always use the
/// full training set. A non-finite loss or gradient stops training, keeps
/// the checkpoints recorded so far and marks the record diverged.
TrialRecord train(MlpNetwork& net, const Matrix& x, const Matrix& y, const TrainConfig& config,
                  const CheckpointObserver& observer = {});

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct AggregateCheckpoint {
  std::size_t epoch = 0;
  MetricSummary mse;
  MetricSummary size;
  std::vector<MetricSummary> dead_fractions;
};

struct AggregateRecord {
  std::vector<AggregateCheckpoint> checkpoints;
  std::size_t trials_used = 0;
  std::vector<std::size_t> diverged_trials;
};

/// Mean and sample standard deviation per checkpoint over non-diverged
/// trials. Records are reduced in trial-index order, so the result does not
/// depend on the order they arrive in.
AggregateRecord aggregate(std::vector<TrialRecord> records);

struct TrialSet {
  std::vector<TrialRecord> trials;  // sorted by trial index
  AggregateRecord aggregate;
};

using TrialRunner = std::function<TrialRecord(std::size_t trial, std::uint64_t seed)>;

/// Runs trial i with seed base_seed + i on up to `workers` threads
/// (0 = hardware concurrency).
TrialSet run_trials(std::uint64_t base_seed, std::size_t n_trials, const TrialRunner& runner,
                    std::size_t workers = 0);

/// Columns trial,epoch,mse,size,dead_frac_layer_1,...
CsvTable trial_records_csv(const std::vector<TrialRecord>& records);

/// Independent sub-seed for a named purpose within one trial.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace reluspline
