#pragma once

// Binary container for named float64 arrays, little-endian:
//   "FGCHKPT1" | u32 version | u32 count | count x entry
//   entry = u32 name_len | name bytes | u32 rank | rank x u64 extent | f64 payload

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foldgraph/network.hpp"
#include "foldgraph/trainer.hpp"

namespace foldgraph {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ArrayEntry {
  std::string name;
  std::vector<std::uint64_t> extents;
  std::vector<double> data;

  friend bool operator==(const ArrayEntry&, const ArrayEntry&) = default;
};

void write_array_table(const std::filesystem::path& path, const std::vector<ArrayEntry>& entries);
/// Throws LoadError with the byte offset on a bad magic, version mismatch or truncation.
std::vector<ArrayEntry> read_array_table(const std::filesystem::path& path);

struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  std::optional<Model> model;
  TrainState state;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg,
                     const TrainState& state);
/// Rebuilds the model from the stored configuration and overwrites every parameter.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace foldgraph
