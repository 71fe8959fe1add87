#include "foldgraph/classifier.hpp"

#include <cmath>
#include <set>
#include <string>

#include "foldgraph/errors.hpp"
#include "foldgraph/kernels.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

LinearClassifier fit_classifier(const Matrix& codes, const std::vector<std::size_t>& labels,
                                const ClassifierConfig& cfg) {
  const std::size_t n = codes.rows(), d = codes.cols();
  if (labels.size() != n) {
    throw DimensionError("fit_classifier: " + std::to_string(n) + " codes but " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw DomainError("fit_classifier: need at least two classes");
  const std::size_t k = *distinct.rbegin() + 1;
  if (n < k) throw DomainError("fit_classifier: fewer samples than classes");
  if (d == 0) throw DimensionError("fit_classifier: codes have no features");

  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += codes(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) scale[j] += (codes(i, j) - mean[j]) * (codes(i, j) - mean[j]);
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s == 0.0) s = 1.0;
  }
  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) z(i, j) = (codes(i, j) - mean[j]) / scale[j];

  Rng rng(cfg.seed);
  std::vector<double> w(k * d), b(k, 0.0);
  for (double& x : w) x = rng.uniform(-1e-3, 1e-3);
  std::vector<double> mw(w.size(), 0.0), vw(w.size(), 0.0), mb(k, 0.0), vb(k, 0.0);
  std::vector<double> gw(w.size()), gb(k);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t t = 0; t < w.size(); ++t) gw[t] = cfg.l2 * w[t];
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto zi = z.row(i);
      for (std::size_t c = 0; c < k; ++c) {
        double s = b[c];
        for (std::size_t j = 0; j < d; ++j) s += w[c * d + j] * zi[j];
        const double y = labels[i] == c ? 1.0 : -1.0;
        if (1.0 - y * s > 0.0) {
          kernels::axpy(d, -y * inv_n, zi.data(), gw.data() + c * d);
          gb[c] -= y * inv_n;
        }
      }
    }
    const double td = static_cast<double>(epoch);
    const kernels::AdamCoeffs coeffs{cfg.lr, 0.9, 0.999, 1e-8, 1.0 - std::pow(0.9, td),
                                     1.0 - std::pow(0.999, td)};
    kernels::adam_update(w.size(), coeffs, gw.data(), mw.data(), vw.data(), w.data());
    kernels::adam_update(k, coeffs, gb.data(), mb.data(), vb.data(), b.data());
  }

  LinearClassifier clf{Matrix(k, d), std::vector<double>(k)};
  for (std::size_t c = 0; c < k; ++c) {
    double shift = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      clf.weights(c, j) = w[c * d + j] / scale[j];
      shift += clf.weights(c, j) * mean[j];
    }
    clf.bias[c] = b[c] - shift;
  }
  return clf;
}

std::vector<std::size_t> classify(const LinearClassifier& clf, const Matrix& codes) {
  if (codes.cols() != clf.features()) {
    throw DimensionError("classify: codes " + codes.shape_string() + " vs classifier with " +
                         std::to_string(clf.features()) + " features");
  }
  std::vector<std::size_t> out(codes.rows(), 0);
  for (std::size_t i = 0; i < codes.rows(); ++i) {
    double best = 0.0;
    for (std::size_t c = 0; c < clf.classes(); ++c) {
      double s = clf.bias[c];
      for (std::size_t j = 0; j < codes.cols(); ++j) s += clf.weights(c, j) * codes(i, j);
      if (c == 0 || s > best) {
        best = s;
        out[i] = c;
      }
    }
  }
  return out;
}

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace foldgraph
