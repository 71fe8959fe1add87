#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "foldgraph/dense.hpp"

namespace foldgraph {

/// N x 3 coordinates with an optional per-point scalar channel.
class PointCloud {
 public:
  PointCloud() = default;
  /// Throws DomainError for zero points or non-finite coordinates, DimensionError
  /// when `points` is not N x 3 or the scalar channel length differs from N.
  explicit PointCloud(Matrix points, std::optional<std::vector<double>> scalar = std::nullopt);

  std::size_t size() const noexcept { return points_.rows(); }
  const Matrix& points() const noexcept { return points_; }
  std::span<const double> point(std::size_t i) const noexcept { return points_.row(i); }

  bool has_scalar() const noexcept { return scalar_.has_value(); }
  const std::optional<std::vector<double>>& scalar() const noexcept { return scalar_; }
  PointCloud with_scalar(std::vector<double> scalar) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  Matrix points_;
  std::optional<std::vector<double>> scalar_;
};

/// Nearest-neighbour correspondences behind a Chamfer evaluation between a
/// source cloud S (N points) and a reconstruction R (M points).
struct MatchResult {
  std::vector<std::size_t> forward_idx;   // N entries: nearest point of R for each point of S
  std::vector<std::size_t> backward_idx;  // M entries: nearest point of S for each point of R
  double d_forward = 0.0;                 // mean over S of the nearest distance into R
  double d_backward = 0.0;                // mean over R of the nearest distance into S
};

/// Exact O(NM) matching; ties resolve to the lowest index. Accepts raw N x 3 matrices
/// so the training loss can match against an in-flight reconstruction.
MatchResult match_points(const Matrix& s, const Matrix& r);

/// max(d_forward, d_backward).
std::pair<double, MatchResult> augmented_chamfer(const PointCloud& s, const PointCloud& r);
/// d_forward + d_backward.
double chamfer_plain(const PointCloud& s, const PointCloud& r);

/// Subgradient of the augmented Chamfer distance w.r.t. the reconstruction's
/// coordinates under the frozen matching. On an exact tie of the two directional
/// terms both branches contribute with weight 1/2.
Matrix augmented_chamfer_grad(const Matrix& s, const Matrix& r, const MatchResult& match);
/// Subgradient of the plain (sum-form) Chamfer distance w.r.t. the reconstruction.
Matrix chamfer_plain_grad(const Matrix& s, const Matrix& r, const MatchResult& match);

/// Uniform scale + translation into [0,1]^3 preserving aspect ratio. The longest
/// axis spans [0,1]; shorter axes are centred on 0.5, so zero-extent axes land at 0.5.
PointCloud normalize_unit_cube(const PointCloud& s);

enum class SyntheticShape { sphere, torus, cube_surface, plane, z_curve, double_torus };

std::string_view shape_name(SyntheticShape shape) noexcept;
/// Throws DomainError for unknown names.
SyntheticShape parse_shape(std::string_view name);

/// Named real parameters of a synthetic shape:
///   sphere: radius (1)              torus: R (1), r (0.3)
///   cube_surface: side (1)          plane: side (1)
///   z_curve: side (1)               double_torus: R (1), r (0.25), d (0.75)
using ShapeParams = std::map<std::string, double>;

/// Deterministic samples on the named surface (or curve for z_curve).
PointCloud sample_synthetic(SyntheticShape shape, std::size_t n, const ShapeParams& params,
                            std::uint64_t seed);

/// Signed implicit-surface residual of a sample; zero on the surface.
double shape_residual(SyntheticShape shape, const ShapeParams& params, std::span<const double> p);

// ---- text IO -------------------------------------------------------------------------------

PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& cloud);
PointCloud read_ply_ascii(const std::filesystem::path& path);
void write_ply_ascii(const std::filesystem::path& path, const PointCloud& cloud);

/// Dispatches on extension (.xyz or .ply).
PointCloud read_cloud(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double ("%.17g").
std::string format_double(double v);

}  // namespace foldgraph
