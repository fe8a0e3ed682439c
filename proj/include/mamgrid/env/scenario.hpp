#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamgrid/env/problem.hpp"

namespace mamgrid::env {

/// One set-point replacement, e.g. {"load:7", "p_mw", 42.0}.
struct Override {
  std::string element;  // "load:<id>" or "generator:<id>"
  std::string field;    // "p_mw" or "q_mvar"
  double value = 0.0;

  bool operator==(const Override&) const = default;
};

struct Scenario {
  std::string scenario_id;
  std::string base_case;
  std::vector<Override> overrides;
  std::vector<std::string> insecure_tasks;

  bool operator==(const Scenario&) const = default;
};

/// Applies overrides to a copy of `base`. Generator P is clamped to its
/// limits. Throws CaseError for unknown elements or fields.
powergrid::GridCase apply_scenario(const powergrid::GridCase& base, const Scenario& scenario);

/// True iff some interface of `task` carries a flow outside its band.
bool is_insecure(std::span<const double> interface_flows_mw, const Problem& problem, const Task& task);
bool is_insecure(const powergrid::PowerFlowSolution& sol, const Problem& problem, const Task& task);

/// Flow on every catalogue interface for a solution, MW.
std::vector<double> all_interface_flows(const powergrid::PowerFlowSolution& sol, const Problem& problem);

/// The perturbation grid 0.1, 0.2, ..., 2.0.
std::vector<double> default_multipliers();

struct ScenarioConfig {
  double fraction = 0.25;  // share of loads and of controllable generators perturbed
  std::vector<double> multipliers = default_multipliers();
  std::size_t count = 200;          // insecure scenarios wanted
  std::size_t max_attempts = 0;     // 0: 50 * count
  bool reject_slack_overload = true;
  unsigned workers = 1;
};

/// Draws perturbed operating points until `count` scenarios insecure for
/// at least one task exist or the attempt budget runs out. Attempt k uses
/// its own RNG stream seeded from (seed, k), so the result does not depend
/// on `workers`.
std::vector<Scenario> generate_scenarios(const Problem& problem, const ScenarioConfig& cfg, std::uint64_t seed);

struct ScenarioSplit {
  std::vector<Scenario> train;
  std::vector<Scenario> test;
};

/// Seeded shuffle then a `train_fraction` / remainder cut.
ScenarioSplit split_scenarios(std::vector<Scenario> scenarios, double train_fraction, std::uint64_t seed);

nlohmann::json scenarios_to_json(const std::vector<Scenario>& scenarios);
std::vector<Scenario> scenarios_from_json(const nlohmann::json& doc);
std::vector<Scenario> load_scenarios_file(const std::string& path);
void save_scenarios_file(const std::vector<Scenario>& scenarios, const std::string& path);

}  // namespace mamgrid::env
