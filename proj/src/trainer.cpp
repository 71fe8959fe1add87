#include "foldgraph/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("lr must be a finite value >= 0");
  if (batch_size == 0) throw DomainError("batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw DomainError("Adam eps must be positive");
  if (!(clip_norm >= 0.0)) throw DomainError("clip_norm must be >= 0");
}

AdamState AdamState::zeros(const ParameterList& params) {
  AdamState s;
  for (const auto& [name, t] : params) {
    s.m.emplace_back(t.size(), 0.0);
    s.v.emplace_back(t.size(), 0.0);
  }
  return s;
}

void adam_step(const ParameterList& params, AdamState& state, const TrainConfig& cfg, std::uint64_t t) {
  if (t == 0) throw DomainError("adam_step: step index must be >= 1");
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: moment state does not match the parameter list");
  }
  const double td = static_cast<double>(t);
  const kernels::AdamCoeffs coeffs{cfg.lr,
                                   cfg.beta1,
                                   cfg.beta2,
                                   cfg.eps,
                                   1.0 - std::pow(cfg.beta1, td),
                                   1.0 - std::pow(cfg.beta2, td)};
  for (std::size_t p = 0; p < params.size(); ++p) {
    const ad::Tensor& param = params[p].second;
    const auto g = param.grad();
    auto values = const_cast<ad::Tensor&>(param).values();
    kernels::adam_update(values.size(), coeffs, g.data(), state.m[p].data(), state.v[p].data(),
                         values.data());
  }
  state.step = t;
}

std::string format_log_line(const EpochRecord& rec) {
  return "epoch " + std::to_string(rec.epoch) + " loss " + format_double(rec.loss) +
         " wallclock_s " + format_double(rec.wallclock_s);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(seed, epoch);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

double global_grad_norm(const ParameterList& params) {
  double s = 0.0;
  for (const auto& [name, t] : params)
    for (const double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

}  // namespace

std::vector<EpochRecord> train(Model& model, const std::vector<PointCloud>& data,
                               const TrainConfig& cfg, TrainState& state, const TrainHooks& hooks) {
  cfg.validate();
  if (data.empty()) throw DomainError("train: empty dataset");
  const ParameterList& params = model.parameters();
  if (state.adam.m.empty()) state.adam = AdamState::zeros(params);

  std::vector<EpochRecord> log;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      for (const auto& [name, t] : params) t.zero_grad();
      for (std::size_t s = start; s < stop; ++s) {
        const PointCloud& cloud = data[order[s]];
        ad::Tape tape;
        const ForwardPass fp = model.forward(tape, cloud.points());
        const ad::Tensor loss = chamfer_loss(tape, cloud.points(), fp.refined, cfg.loss);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericalError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index) + " (sample " + std::to_string(order[s]) + ")");
        }
        loss_sum += value;
        tape.backward(tape.scale(loss, inv_b));
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = global_grad_norm(params);
        if (!std::isfinite(norm)) {
          throw NumericalError("non-finite gradient in epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_index));
        }
        if (norm > cfg.clip_norm) {
          const double f = cfg.clip_norm / norm;
          for (const auto& [name, t] : params)
            for (double& g : t.grad()) g *= f;
          if (hooks.on_notice) {
            hooks.on_notice("clip epoch " + std::to_string(epoch) + " batch " +
                            std::to_string(batch_index) + " norm " + format_double(norm));
          }
        }
      }
      adam_step(params, state.adam, cfg, state.adam.step + 1);
    }
    state.epochs_done = epoch;
    const EpochRecord rec{
        epoch, loss_sum / static_cast<double>(data.size()),
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    log.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(state);
    }
  }
  return log;
}

double evaluate(const Model& model, const std::vector<PointCloud>& data, LossKind kind) {
  if (data.empty()) throw DomainError("evaluate: empty dataset");
  double total = 0.0;
  for (const PointCloud& cloud : data) {
    const Reconstruction rec = model.reconstruct(cloud);
    total += kind == LossKind::augmented ? augmented_chamfer(cloud, rec.refined).first
                                         : chamfer_plain(cloud, rec.refined);
  }
  return total / static_cast<double>(data.size());
}

}  // namespace foldgraph
