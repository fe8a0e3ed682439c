#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mamgrid/env/environment.hpp"

namespace mamgrid::training {

struct TrainConfig {
  double gamma = 0.9;
  double lr = 1e-3;
  std::size_t batch = 64;
  std::string batch_unit = "transition";
  std::size_t buffer_capacity = 20000;
  std::size_t target_sync = 100;
  double epsilon_start = 0.1;
  double epsilon_end = 0.01;
  std::size_t epsilon_decay_steps = 500000;
  std::size_t warmup = 1000;
  std::size_t total_steps = 500000;
  std::size_t eval_every = 10000;
  std::size_t log_every = 1000;
  double grad_clip = 10.0;
  /// Stop once an evaluation reaches this success rate (%); <= 0 disables.
  double stop_success_rate = 0.0;
  std::uint64_t seed = 0;
  env::EnvConfig env;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; throws std::invalid_argument on
  /// out-of-range values.
  static TrainConfig from_json(const nlohmann::json& doc);
  void validate() const;
};

/// Linear decay from epsilon_start to epsilon_end over epsilon_decay_steps,
/// constant afterwards.
double epsilon(std::size_t step, const TrainConfig& cfg);

}  // namespace mamgrid::training
