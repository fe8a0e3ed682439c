#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamgrid/env/environment.hpp"
#include "mamgrid/env/scenario.hpp"
#include "mamgrid/mam/network.hpp"

namespace mamgrid::training {

struct EpisodeRecord {
  std::string scenario_id;
  std::string task_id;
  bool success = false;
  std::string cause;     // termination cause, or "stuck" when every action was masked
  std::size_t steps = 0;
  double cost = 0.0;     // total generation cost at the final state, $
  double seconds = 0.0;  // wall-clock inference + simulation time
};

struct EvalSummary {
  std::string task_id;  // "all" for the aggregate
  std::size_t episodes = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;  // percent
  double mean_cost = 0.0;
  double mean_seconds = 0.0;
};

struct EvalReport {
  std::vector<EpisodeRecord> episodes;
  std::vector<EvalSummary> per_task;  // in task catalogue order, tasks with episodes only
  EvalSummary aggregate;
  std::size_t scenario_count = 0;
  std::string checkpoint_hash;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& doc);
};

/// Per-task and aggregate summaries recomputed from episode records.
/// `task_order` fixes the order of per_task.
void summarize(EvalReport& report, const std::vector<std::string>& task_order);

/// Greedy (epsilon = 0) rollouts of every (scenario, insecure task) pair.
/// Throws std::invalid_argument on an empty scenario list and
/// mam::CheckpointMismatch when the network was built for another problem.
EvalReport evaluate(const mam::QNetwork& net, const tensornet::ParameterSet& params,
                    std::shared_ptr<const env::Problem> problem, std::span<const env::Scenario> scenarios,
                    const env::EnvConfig& cfg);

/// One greedy episode; used by evaluate and the attribution tooling.
EpisodeRecord greedy_episode(const mam::QNetwork& net, const tensornet::ParameterSet& params, env::Environment& env,
                             const env::Scenario& scenario, std::size_t task);

}  // namespace mamgrid::training
