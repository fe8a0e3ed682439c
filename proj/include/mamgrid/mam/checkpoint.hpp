#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mamgrid/mam/network.hpp"

namespace mamgrid::mam {

/// The checkpoint was written for a different grid, interface catalogue or
/// task set than the one it is being applied to.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  FeatureStats stats;
  std::uint64_t fingerprint = 0;
  nlohmann::json tensors;
  nlohmann::json extra;  // free-form run metadata (training config, step, ...)

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& doc);
  /// FNV-1a over the serialized document.
  std::uint64_t content_hash() const;
};

Checkpoint make_checkpoint(const QNetwork& net, const tensornet::ParameterSet& params, nlohmann::json extra = {});
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the network for `problem` and loads the tensors. Throws
/// CheckpointMismatch when the problem fingerprint differs.
std::pair<QNetwork, tensornet::ParameterSet> restore(const env::Problem& problem, const Checkpoint& ckpt);

std::string hex64(std::uint64_t value);

}  // namespace mamgrid::mam
