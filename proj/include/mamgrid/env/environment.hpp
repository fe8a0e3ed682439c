#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mamgrid/env/problem.hpp"
#include "mamgrid/env/rewards.hpp"
#include "mamgrid/env/scenario.hpp"

namespace mamgrid::env {

inline constexpr int kFeatureCount = 4;

/// One solved operating point. The adjacency is shared through Problem.
struct OperationState {
  Eigen::MatrixXd features;          // N x 4: P MW, Q MVAr, V p.u., angle rad
  Eigen::VectorXd setpoints_mw;      // per generator; slack entry is the solved output
  powergrid::VoltageProfile voltages;
  std::vector<double> interface_flows_mw;
};

/// Builds a state from a converged solution. Features are copied verbatim
/// from the solution arrays.
OperationState make_state(const powergrid::PowerFlowSolution& sol, const powergrid::GridCase& grid,
                          const Problem& problem);

enum class Termination { none, success, divergence, slack_overload, horizon };
std::string_view to_string(Termination t);

struct StepResult {
  double reward = 0.0;
  bool terminal = false;
  Termination cause = Termination::none;
  double reward_pf = 0.0;  // components of the shaped reward, reported even when overridden
  double reward_ed = 0.0;
};

struct EnvConfig {
  RewardWeights weights;
  std::size_t horizon = 50;
  double decrease_factor = 0.9;
  double increase_factor = 1.1;
};

/// Action slot layout: 2k lowers controllable generator k, 2k+1 raises it.
inline std::size_t action_generator(std::size_t action) { return action / 2; }
inline bool action_raises(std::size_t action) { return action % 2 == 1; }

/// Raise allowed iff factor * P <= P_max; lower allowed iff factor * P >= P_min.
std::vector<bool> valid_action_mask(const Problem& problem, const OperationState& state, const EnvConfig& cfg = {});

/// Power-flow reward of a task given every catalogue interface flow.
double task_pf_reward(const Problem& problem, const Task& task, std::span<const double> interface_flows_mw);

/// w_ed such that |w_ed * R_ed(base)| is 1% of w_pf times the mean half band
/// width of the interface catalogue.
double default_ed_weight(const Problem& problem, double w_pf);

/// Single-threaded, stateful episode runner over a shared Problem.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const Problem> problem, EnvConfig cfg = {});

  /// Throws ContractError if the task is not insecure in the scenario and
  /// CaseError if the scenario's base flow diverges.
  const OperationState& reset(const Scenario& scenario, std::size_t task);
  const OperationState& reset(const Scenario& scenario, const std::string& task_id);

  /// Throws ContractError for a masked action, an out-of-range action or a
  /// finished episode.
  StepResult step(std::size_t action);

  const OperationState& state() const { return state_; }
  std::vector<bool> mask() const { return valid_action_mask(*problem_, state_, cfg_); }
  const Problem& problem() const { return *problem_; }
  const std::shared_ptr<const Problem>& problem_ptr() const { return problem_; }
  const EnvConfig& config() const { return cfg_; }
  const Task& task() const { return problem_->tasks()[task_]; }
  std::size_t task_position() const { return task_; }
  std::size_t steps() const { return steps_; }
  bool done() const { return done_; }
  const powergrid::GridCase& grid() const { return grid_; }

 private:
  std::shared_ptr<const Problem> problem_;
  EnvConfig cfg_;
  powergrid::GridCase grid_;
  OperationState state_;
  std::size_t task_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

}  // namespace mamgrid::env
