#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "foldgraph/autodiff.hpp"
#include "foldgraph/network.hpp"
#include "foldgraph/pointcloud.hpp"

namespace foldgraph {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::augmented;
  /// Checkpoint cadence in epochs; 0 disables periodic checkpoints.
  std::size_t checkpoint_every = 0;
  /// Global gradient-norm ceiling; 0 disables clipping.
  double clip_norm = 10.0;

  /// Throws DomainError unless lr >= 0, batch_size >= 1 and the Adam constants are valid.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

using ParameterList = std::vector<std::pair<std::string, ad::Tensor>>;

/// First and second moments per parameter, in parameter order.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  static AdamState zeros(const ParameterList& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update at step t >= 1, applied in parameter order using
/// each parameter's current gradient buffer.
void adam_step(const ParameterList& params, AdamState& state, const TrainConfig& cfg, std::uint64_t t);

struct TrainState {
  AdamState adam;
  std::size_t epochs_done = 0;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean per-sample loss over the epoch
  double wallclock_s = 0.0;
};

/// "epoch <n> loss <decimal> wallclock_s <decimal>".
std::string format_log_line(const EpochRecord& rec);

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Free-form notices, e.g. when gradient clipping fires.
  std::function<void(const std::string&)> on_notice;
  /// Called after epochs that are multiples of checkpoint_every.
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Runs epochs state.epochs_done + 1 .. cfg.epochs. Each epoch visits the data in
/// an order drawn from (cfg.seed, epoch), so a resumed run replays the same
/// batches. Throws NumericalError naming the batch when a loss is not finite.
std::vector<EpochRecord> train(Model& model, const std::vector<PointCloud>& data,
                               const TrainConfig& cfg, TrainState& state,
                               const TrainHooks& hooks = {});

/// Mean loss over `data` of the refined reconstruction, without updating anything.
double evaluate(const Model& model, const std::vector<PointCloud>& data, LossKind kind);

/// Deterministic permutation of 0..n-1 for a given epoch.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

}  // namespace foldgraph
