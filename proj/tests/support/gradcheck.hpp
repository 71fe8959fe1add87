#pragma once

// Central finite-difference gradient checks against the tape's reverse pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "foldgraph/autodiff.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph::testing {

using LossFn = std::function<ad::Tensor(ad::Tape&, const std::vector<ad::Tensor>&)>;

struct GradCheck {
  double rel_error = 0.0;
  std::size_t checked = 0;
};

inline ad::Tensor random_leaf(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::leaf(std::move(shape), std::move(v));
}

/// sum(y ⊙ w) for a fixed weight tensor, so every output entry carries a distinct cotangent.
inline ad::Tensor weighted_sum(ad::Tape& tape, const ad::Tensor& y, const ad::Tensor& w) {
  return tape.sum(tape.mul(y, w));
}

inline double evaluate(const std::vector<ad::Tensor>& leaves, const LossFn& f) {
  ad::Tape tape;
  return f(tape, leaves).item();
}

/// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖) over the checked entries.
/// With `max_entries` > 0 only that many (leaf, index) pairs, drawn from `rng`, are probed.
inline GradCheck check_gradients(const std::vector<ad::Tensor>& leaves, const LossFn& f, double h = 1e-6,
                                 std::size_t max_entries = 0, Rng* rng = nullptr) {
  for (const auto& l : leaves) l.zero_grad();
  {
    ad::Tape tape;
    tape.backward(f(tape, leaves));
  }
  std::vector<std::pair<std::size_t, std::size_t>> probes;
  for (std::size_t t = 0; t < leaves.size(); ++t)
    for (std::size_t i = 0; i < leaves[t].size(); ++i) probes.emplace_back(t, i);
  if (max_entries > 0 && rng != nullptr && probes.size() > max_entries) {
    for (std::size_t i = 0; i < max_entries; ++i) {
      const std::size_t j = i + rng->below(probes.size() - i);
      std::swap(probes[i], probes[j]);
    }
    probes.resize(max_entries);
  }
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (const auto& [t, i] : probes) {
    ad::Tensor leaf = leaves[t];
    const double saved = leaf.values()[i];
    leaf.values()[i] = saved + h;
    const double up = evaluate(leaves, f);
    leaf.values()[i] = saved - h;
    const double down = evaluate(leaves, f);
    leaf.values()[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = leaf.grad()[i];
    diff2 += (analytic - numeric) * (analytic - numeric);
    a2 += analytic * analytic;
    n2 += numeric * numeric;
  }
  const double scale = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
  return {std::sqrt(diff2) / scale, probes.size()};
}

}  // namespace foldgraph::testing
