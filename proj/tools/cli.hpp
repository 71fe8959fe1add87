#pragma once

// In-process entry point of the foldgraph command-line tool.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "foldgraph/pointcloud.hpp"

namespace foldgraph::cli {

/// Bad flags, missing inputs or unreadable files; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// args excludes the program name. Returns 0 on success, 1 on a failed
/// assertion or certificate, 2 on usage or IO errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct SyntheticSpec {
  SyntheticShape shape = SyntheticShape::sphere;
  std::size_t count = 0;
  std::size_t n_points = 0;
  ShapeParams params;
};

/// "shape:count:n_points[:k=v]" entries separated by commas. A comma-separated
/// token without ':' continues the parameter list of the entry before it, so
/// "torus:8:2048:R=1,r=0.3,sphere:8:512" is two entries.
std::vector<SyntheticSpec> parse_synthetic(std::string_view text);

struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<std::string> names;
  std::vector<std::string> labels;
};

/// Cloud t of the whole list is sampled with seed derived from (seed, t).
Dataset make_synthetic(const std::vector<SyntheticSpec>& specs, std::uint64_t seed, bool normalize);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
/// Checksum of an output file. For train logs the wallclock fields are dropped
/// first, since elapsed time is the one quantity a rerun cannot reproduce.
std::uint64_t artifact_checksum(const std::filesystem::path& path);

}  // namespace foldgraph::cli
