#pragma once

// Constructive oracles for the reconstruction bounds and graph-smoothness results:
// voxel codecs with error certificates, a zero-TV graph solver, and randomized
// checks that graph filtering does not increase graph variation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foldgraph/dense.hpp"
#include "foldgraph/pointcloud.hpp"
#include "foldgraph/rng.hpp"

namespace foldgraph {

enum class StridePolicy { every_voxel, every_other };
/// Where a decoded voxel is placed: its center, or the far corner (i/K, j/K, k/K)
/// in 1-based indices. The corner form exists to demonstrate that it breaks the bound.
enum class ProxyMode { center, corner };

/// Voxel indices are 0-based; flat index (i·K + j)·K + k.
struct VoxelCode {
  std::size_t k_res = 0;
  StridePolicy stride = StridePolicy::every_voxel;
  /// every_voxel: K³ entries. every_other: one entry per voxel with i+j+k even, in raster order.
  std::vector<std::uint8_t> occupancy;

  std::size_t code_len() const noexcept { return occupancy.size(); }
};

std::size_t voxel_index(std::size_t k_res, std::size_t i, std::size_t j, std::size_t k) noexcept;
std::array<std::size_t, 3> voxel_triple(std::size_t k_res, std::size_t flat) noexcept;

/// Occupancy of all K³ voxels; a coordinate of exactly 1 falls in the last voxel.
/// Throws DomainError naming the first point outside [0,1]³.
VoxelCode voxel_encode(const PointCloud& s, std::size_t k_res);
/// One proxy point per occupied voxel of an every_voxel code. Throws DomainError when empty.
PointCloud voxel_decode(const VoxelCode& code, ProxyMode mode = ProxyMode::center);

struct Certificate {
  int theorem = 0;
  std::size_t k_res = 0;
  std::size_t code_len = 0;
  double distance = 0.0;
  double bound = 0.0;
  bool pass = false;

  /// "theorem <n> K <k> C <c> distance <d> bound <b> PASS|FAIL".
  std::string format() const;
};

/// √3 / (2·∛C).
double thm1_bound(double code_len);
/// 1 / ∛(2C).
double thm2_bound(double code_len);

Certificate certify_thm1(const PointCloud& s, std::size_t k_res, ProxyMode mode = ProxyMode::center);

/// First voxel breaking the sandwich condition: with forward offsets
/// δ ∈ {0,1}³ \ {0} clamped to the grid, every occupied voxel needs an occupied
/// forward neighbour and every empty voxel an empty one.
std::optional<std::array<std::size_t, 3>> find_smoothness_violation(const VoxelCode& full);

/// Keeps the voxels with i+j+k even.
VoxelCode stride_encode(const VoxelCode& full);
/// Recovered voxels plus every voxel with a recovered forward neighbour (δ ∈ {0,1}³).
VoxelCode stride_interpolate(const VoxelCode& strided);

/// Throws PreconditionError naming a violating voxel when the occupancy is not smooth.
Certificate certify_thm2(const PointCloud& s, std::size_t k_res);

/// A ≠ I with A·x1 = x1 and A·x2 = x2. Each row is the minimum-norm solution of
/// its two constraints, which makes A the orthogonal projector onto span{x1, x2}.
/// Throws DomainError for M <= 2 and DimensionError for unequal lengths.
Matrix solve_zero_tv(std::span<const double> x1, std::span<const double> x2);

/// Random symmetric row-stochastic matrix: W/d_max + diag(1 − deg/d_max) for a
/// random weighted undirected graph W with maximum degree d_max.
Matrix random_stochastic_graph(std::size_t m, double edge_probability, Rng& rng);

struct VariationReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  /// min over trials of (before − after); negative means the variation grew.
  double worst_margin = 0.0;
  double radius = 0.0;
};

/// graph_tv(A, ½(I+A)x) <= graph_tv(A, x) + 1e-10 for random normal x.
/// Throws PreconditionError when spectral_radius(a) > 1 + 1e-9.
VariationReport check_tv_decrease(const Matrix& a, std::size_t trials, std::uint64_t seed);

/// (h x)ᵀ𝓛(h x) <= xᵀ𝓛x + 1e-10 with h = (μI + 𝓛)⁻¹. The inequality is a theorem
/// only for μ >= 1: along an eigenvector it reads λ/(μ+λ)² <= λ.
VariationReport check_laplacian_smoothing(const Matrix& a, double mu, std::size_t trials,
                                          std::uint64_t seed);

/// The 4 x 4 'Z' occupancy grid, its pair of coordinate signals, and an 8 x 8
/// graph under which both signals have zero graph total variation.
struct ZShapeExample {
  Matrix grid;
  std::vector<double> x1;
  std::vector<double> x2;
  Matrix adjacency;
};
ZShapeExample z_shape_example();

}  // namespace foldgraph
