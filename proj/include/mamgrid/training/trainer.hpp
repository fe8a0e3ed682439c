#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamgrid/env/scenario.hpp"
#include "mamgrid/mam/network.hpp"
#include "mamgrid/training/config.hpp"
#include "mamgrid/training/evaluate.hpp"

namespace mamgrid::training {

struct TrainHooks {
  /// Receives each metrics record {step, loss, epsilon, eval_success_rate,
  /// eval_cost}; loss/eval fields are null when not available.
  std::function<void(const nlohmann::json&)> on_metrics;
  /// Receives every evaluation report with the step it was taken at.
  std::function<void(std::size_t, const EvalReport&, const mam::QNetwork&, const tensornet::ParameterSet&)> on_eval;
};

struct TrainResult {
  mam::QNetwork network;
  tensornet::ParameterSet params;       // final online parameters
  tensornet::ParameterSet best_params;  // parameters at the best evaluation
  std::optional<EvalReport> best_eval;
  std::size_t best_step = 0;
  std::size_t steps = 0;
  std::size_t episodes = 0;
  std::size_t divergent_episodes = 0;
  std::size_t stuck_episodes = 0;
  std::size_t updates = 0;
};

/// Feature statistics over the initial operating states of the scenarios.
mam::FeatureStats scenario_feature_stats(std::shared_ptr<const env::Problem> problem,
                                         std::span<const env::Scenario> scenarios, const env::EnvConfig& cfg);

/// Off-policy DQN training loop on one environment: each episode samples a
/// task uniformly (among tasks with at least one insecure training
/// scenario), then a scenario uniformly among those insecure for it, and
/// rolls out epsilon-greedily; one update per environment step after warmup.
/// Evaluations run greedily on `test` every eval_every steps and at the end.
TrainResult run_training(std::shared_ptr<const env::Problem> problem, const mam::ModelConfig& model,
                         std::span<const env::Scenario> train, std::span<const env::Scenario> test,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace mamgrid::training
