#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "foldgraph/dense.hpp"

namespace foldgraph {

struct ClassifierConfig {
  std::size_t epochs = 500;
  double lr = 1e-2;
  /// Weight on ½‖W‖² (computed on standardized features).
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

/// scores = W·code + b, one row of W per class.
struct LinearClassifier {
  Matrix weights;
  std::vector<double> bias;

  std::size_t classes() const noexcept { return weights.rows(); }
  std::size_t features() const noexcept { return weights.cols(); }
};

/// One-vs-rest hinge loss minimized by full-batch Adam. Features are
/// standardized during fitting and the scaling is folded back into W and b.
/// Throws DomainError when fewer than two classes occur or labels are out of
/// range, DimensionError when label and code counts differ.
LinearClassifier fit_classifier(const Matrix& codes, const std::vector<std::size_t>& labels,
                                const ClassifierConfig& cfg = {});

/// Argmax of the scores; ties go to the lowest class index.
std::vector<std::size_t> classify(const LinearClassifier& clf, const Matrix& codes);

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth);

}  // namespace foldgraph
