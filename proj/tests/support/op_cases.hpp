#pragma once

// One finite-difference case per differentiable operation, parameterized by an Rng
// so the unit suite and the acceptance run can draw as many instances as they need.

#include <string>
#include <vector>

#include "foldgraph/autodiff.hpp"
#include "foldgraph/network.hpp"
#include "gradcheck.hpp"

namespace foldgraph::testing {

struct OpCase {
  std::string name;
  std::vector<ad::Tensor> leaves;
  LossFn loss;
};

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<OpCase> make_op_cases(Rng& rng) {
  using ad::Tape;
  using ad::Tensor;
  std::vector<OpCase> cases;
  auto w = [&rng](ad::Shape s) { return random_leaf(std::move(s), rng); };

  {
    Tensor wo = w({3, 5});
    cases.push_back({"matmul", {w({3, 4}), w({4, 5})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.matmul(x[0], x[1]), wo);
                     }});
  }
  {
    Tensor wo = w({4, 3});
    cases.push_back({"transpose", {w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.transpose(x[0]), wo);
                     }});
  }
  {
    Tensor wo = w({2, 6});
    cases.push_back({"reshape", {w({4, 3})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.reshape(x[0], {2, 6}), wo);
                     }});
  }
  {
    Tensor wo = w({3, 4});
    cases.push_back({"add", {w({3, 4}), w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.add(x[0], x[1]), wo);
                     }});
    cases.push_back({"sub", {w({3, 4}), w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.sub(x[0], x[1]), wo);
                     }});
    cases.push_back({"mul", {w({3, 4}), w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.mul(x[0], x[1]), wo);
                     }});
    cases.push_back({"scale", {w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.scale(x[0], -2.5), wo);
                     }});
    cases.push_back({"add_row_vector", {w({3, 4}), w({4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.add_row_vector(x[0], x[1]), wo);
                     }});
    cases.push_back({"relu", {w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.relu(x[0]), wo);
                     }});
    cases.push_back({"softmax_rows", {w({3, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.softmax_rows(x[0]), wo);
                     }});
  }
  {
    Tensor wo = w({5, 4});
    cases.push_back({"broadcast_rows", {w({1, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.broadcast_rows(x[0], 5), wo);
                     }});
  }
  {
    Tensor wo = w({4, 4});
    cases.push_back({"add_identity", {w({4, 4})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.add_identity(x[0], 0.7), wo);
                     }});
  }
  {
    Tensor wo = w({5});
    cases.push_back({"maxpool_over_points", {w({7, 5})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.maxpool_over_points(x[0]), wo);
                     }});
  }
  {
    Tensor wo = w({3, 7});
    cases.push_back({"concat_cols", {w({3, 4}), w({3, 3})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.concat_cols(x[0], x[1]), wo);
                     }});
  }
  {
    // a = P·Pᵀ + 4I keeps the system SPD under every perturbation of P.
    Tensor wo = w({4, 2});
    cases.push_back({"spd_solve", {w({4, 4}), w({4, 2})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       const Tensor a = t.add_identity(t.matmul(x[0], t.transpose(x[0])), 4.0);
                       return weighted_sum(t, t.spd_solve(a, x[1]), wo);
                     }});
  }
  {
    Tensor wo = w({5, 5});
    cases.push_back({"laplacian", {random_leaf({5, 5}, rng, 0.0, 1.0)},
                     [wo](Tape& t, const std::vector<Tensor>& x) { return weighted_sum(t, t.laplacian(x[0]), wo); }});
    cases.push_back({"symmetrize", {w({5, 5})}, [wo](Tape& t, const std::vector<Tensor>& x) {
                       return weighted_sum(t, t.symmetrize(x[0]), wo);
                     }});
  }
  cases.push_back({"sum", {w({3, 4})}, [](Tape& t, const std::vector<Tensor>& x) { return t.sum(x[0]); }});
  {
    const Matrix src = random_matrix(10, 3, rng);
    cases.push_back({"chamfer_augmented", {w({12, 3})}, [src](Tape& t, const std::vector<Tensor>& x) {
                       return chamfer_loss(t, src, x[0], LossKind::augmented);
                     }});
    cases.push_back({"chamfer_plain", {w({12, 3})}, [src](Tape& t, const std::vector<Tensor>& x) {
                       return chamfer_loss(t, src, x[0], LossKind::plain);
                     }});
  }
  return cases;
}

/// A model small enough to probe by finite differences.
inline ModelConfig tiny_model_config(FilterKind filter) {
  ModelConfig cfg;
  cfg.code_len = 8;
  cfg.lattice_side = 4;
  cfg.knn_k = 3;
  cfg.sigma = 0.2;
  cfg.mu = 0.5;
  cfg.filter = filter;
  cfg.encoder_point_widths = {8, 16};
  cfg.encoder_code_widths = {16};
  cfg.fold_widths = {16};
  cfg.fold_inner_dim = 3;
  cfg.topo_hidden = 8;
  return cfg;
}

}  // namespace foldgraph::testing
