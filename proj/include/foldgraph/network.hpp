#pragma once

// Autoencoder: point-wise MLP encoder with max-pooling, two-stage folding of a
// 2D lattice, per-input graph-topology inference, and a graph-filtering output.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "foldgraph/autodiff.hpp"
#include "foldgraph/dense.hpp"
#include "foldgraph/graph_signal.hpp"
#include "foldgraph/pointcloud.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

enum class Activation { relu, none };
enum class FilterKind { none, adjacency, laplacian };
enum class LossKind { augmented, plain };

std::string_view filter_name(FilterKind kind) noexcept;
/// Accepts none | adjacency | laplacian; DomainError otherwise.
FilterKind parse_filter(std::string_view name);
/// "augcd"/"augmented" and "cd"/"plain"; DomainError otherwise.
std::string_view loss_name(LossKind kind) noexcept;
LossKind parse_loss(std::string_view name);

/// Fully connected layer y = x·Wᵀ + b, W stored out x in.
struct DenseLayer {
  ad::Tensor weight;
  ad::Tensor bias;
  Activation activation = Activation::relu;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
};

class MlpStack {
 public:
  MlpStack() = default;
  /// Layers of the given output widths; ReLU after every layer except the last,
  /// which uses `last`. Weights are Glorot-uniform from `rng`, biases zero.
  MlpStack(std::size_t in_dim, const std::vector<std::size_t>& widths, Activation last, Rng& rng);

  ad::Tensor forward(ad::Tape& tape, const ad::Tensor& x) const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t in_dim() const noexcept { return layers_.front().in_dim(); }
  std::size_t out_dim() const noexcept { return layers_.back().out_dim(); }

 private:
  std::vector<DenseLayer> layers_;
};

struct ModelConfig {
  std::size_t code_len = 512;
  std::size_t lattice_side = 45;
  std::size_t knn_k = 96;
  double sigma = 0.08;
  double mu = 0.5;
  FilterKind filter = FilterKind::adjacency;
  std::vector<std::size_t> encoder_point_widths{64, 128, 1024};
  /// Hidden widths of the code MLP; its output width is code_len.
  std::vector<std::size_t> encoder_code_widths{512};
  /// Hidden widths of each folding stage.
  std::vector<std::size_t> fold_widths{512, 512};
  /// Output width of the first folding stage.
  std::size_t fold_inner_dim = 3;
  std::size_t topo_hidden = 256;

  std::size_t lattice_size() const noexcept { return lattice_side * lattice_side; }
  /// Throws DomainError on zero widths or an invalid (k, sigma, mu).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Result of one differentiable forward pass.
struct ForwardPass {
  ad::Tensor code;          // 1 x C
  ad::Tensor coarse;        // M x 3
  ad::Tensor adjacency;     // M x M, symmetric (a0 when the filter is none)
  ad::Tensor adjacency_raw; // M x M row-stochastic pre-symmetrization (undefined for none)
  ad::Tensor refined;       // M x 3
};

/// Value-level reconstruction.
struct Reconstruction {
  std::vector<double> code;
  PointCloud coarse;
  PointCloud refined;
  Matrix adjacency;
};

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return cfg_; }
  const Lattice2D& lattice() const noexcept { return lattice_; }
  const Matrix& initial_adjacency() const noexcept { return a0_; }

  /// Every trainable tensor in a fixed order ("<stack>.<layer>.weight|bias").
  const std::vector<std::pair<std::string, ad::Tensor>>& parameters() const noexcept {
    return params_;
  }
  std::size_t parameter_count() const noexcept;

  const MlpStack& encoder_point_mlp() const noexcept { return enc_point_; }
  const MlpStack& encoder_code_mlp() const noexcept { return enc_code_; }
  const MlpStack& fold1() const noexcept { return fold1_; }
  const MlpStack& fold2() const noexcept { return fold2_; }
  const MlpStack& topo1() const noexcept { return topo1_; }
  const MlpStack& topo2() const noexcept { return topo2_; }

  /// points: N x 3. Throws DomainError for N == 0.
  ad::Tensor encode(ad::Tape& tape, const Matrix& points) const;
  ad::Tensor fold(ad::Tape& tape, const ad::Tensor& code) const;
  /// Returns (row-stochastic raw matrix, symmetrized adjacency).
  std::pair<ad::Tensor, ad::Tensor> infer_topology(ad::Tape& tape, const ad::Tensor& code) const;
  ForwardPass forward(ad::Tape& tape, const Matrix& points) const;

  std::vector<double> encode(const PointCloud& cloud) const;
  Reconstruction reconstruct(const PointCloud& cloud) const;

 private:
  ModelConfig cfg_;
  Lattice2D lattice_;
  Matrix a0_;
  ad::Tensor lattice_nodes_;
  ad::Tensor a0_tensor_;
  MlpStack enc_point_, enc_code_, fold1_, fold2_, topo1_, topo2_;
  std::vector<std::pair<std::string, ad::Tensor>> params_;
};

/// Refinement step for a given adjacency and coarse reconstruction:
/// none → coarse, adjacency → ½(I + A)·coarse, laplacian → (μI + 𝓛)⁻¹·coarse.
ad::Tensor apply_filter(ad::Tape& tape, FilterKind kind, const ad::Tensor& adjacency,
                        const ad::Tensor& coarse, double mu);

/// Chamfer loss between a fixed source cloud and a differentiable reconstruction.
ad::Tensor chamfer_loss(ad::Tape& tape, const Matrix& source, const ad::Tensor& recon, LossKind kind);

}  // namespace foldgraph
