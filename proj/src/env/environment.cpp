#include "mamgrid/env/environment.hpp"

#include <cmath>

namespace mamgrid::env {

OperationState make_state(const powergrid::PowerFlowSolution& sol, const powergrid::GridCase& grid,
                          const Problem& problem) {
  OperationState s;
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  s.features.resize(n, kFeatureCount);
  s.features.col(0) = sol.p_mw;
  s.features.col(1) = sol.q_mvar;
  s.features.col(2) = sol.vm;
  s.features.col(3) = sol.va;
  s.setpoints_mw.resize(static_cast<Eigen::Index>(grid.generators.size()));
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    s.setpoints_mw(static_cast<Eigen::Index>(g)) = grid.generators[g].p_mw;
  }
  const auto slack = static_cast<Eigen::Index>(grid.slack_generator_index());
  s.setpoints_mw(slack) = sol.gen_p_mw(slack);
  s.voltages = sol.voltages();
  s.interface_flows_mw = all_interface_flows(sol, problem);
  return s;
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::none: return "none";
    case Termination::success: return "success";
    case Termination::divergence: return "divergence";
    case Termination::slack_overload: return "slack_overload";
    case Termination::horizon: return "horizon";
  }
  return "none";
}

std::vector<bool> valid_action_mask(const Problem& problem, const OperationState& state, const EnvConfig& cfg) {
  const auto& gens = problem.grid().generators;
  std::vector<bool> mask(problem.action_count());
  for (std::size_t k = 0; k < problem.controllable().size(); ++k) {
    const std::size_t g = problem.controllable()[k];
    const double p = state.setpoints_mw(static_cast<Eigen::Index>(g));
    mask[2 * k] = cfg.decrease_factor * p >= gens[g].p_min_mw;
    mask[2 * k + 1] = cfg.increase_factor * p <= gens[g].p_max_mw;
  }
  return mask;
}

double task_pf_reward(const Problem& problem, const Task& task, std::span<const double> interface_flows_mw) {
  std::vector<double> flows;
  std::vector<const powergrid::TransmissionInterface*> ifaces;
  for (std::size_t k : task.interfaces) {
    flows.push_back(interface_flows_mw[k]);
    ifaces.push_back(&problem.interfaces()[k]);
  }
  return reward_pf_multi(flows, ifaces);
}

double default_ed_weight(const Problem& problem, double w_pf) {
  if (problem.interfaces().empty()) return 0.0;
  double half_width = 0.0;
  for (const auto& iface : problem.interfaces()) half_width += 0.5 * (iface.sigma_plus - iface.sigma_minus);
  half_width /= static_cast<double>(problem.interfaces().size());
  const auto sol = problem.solver().solve(problem.grid());
  const double ed = sol.converged ? std::abs(reward_ed(problem.grid(), sol.gen_p_mw)) : std::abs(reward_ed(problem.grid()));
  if (ed == 0.0) return 0.0;
  return 0.01 * w_pf * half_width / ed;
}

Environment::Environment(std::shared_ptr<const Problem> problem, EnvConfig cfg)
    : problem_(std::move(problem)), cfg_(cfg), grid_(problem_->grid()) {
  if (cfg_.horizon == 0) throw ContractError("Environment: horizon must be positive");
}

const OperationState& Environment::reset(const Scenario& scenario, const std::string& task_id) {
  return reset(scenario, problem_->task_index(task_id));
}

const OperationState& Environment::reset(const Scenario& scenario, std::size_t task) {
  if (task >= problem_->tasks().size()) throw ContractError("reset: task index out of range");
  const Task& t = problem_->tasks()[task];
  if (std::find(scenario.insecure_tasks.begin(), scenario.insecure_tasks.end(), t.id) ==
      scenario.insecure_tasks.end()) {
    throw ContractError("reset: task '" + t.id + "' is not insecure in scenario '" + scenario.scenario_id + "'");
  }
  powergrid::GridCase grid = apply_scenario(problem_->grid(), scenario);
  const auto sol = problem_->solver().solve(grid);
  if (!sol.converged) {
    throw powergrid::CaseError("scenario '" + scenario.scenario_id + "': base power flow diverges");
  }
  OperationState s = make_state(sol, grid, *problem_);
  if (!is_insecure(s.interface_flows_mw, *problem_, t)) {
    throw ContractError("reset: task '" + t.id + "' is secure in scenario '" + scenario.scenario_id + "'");
  }
  grid_ = std::move(grid);
  state_ = std::move(s);
  task_ = task;
  steps_ = 0;
  done_ = false;
  return state_;
}

StepResult Environment::step(std::size_t action) {
  if (done_) throw ContractError("step: episode is over; call reset");
  if (action >= problem_->action_count()) throw ContractError("step: action index out of range");
  if (!mask()[action]) throw ContractError("step: action " + std::to_string(action) + " is masked");

  const std::size_t g = problem_->controllable()[action_generator(action)];
  powergrid::GridCase next = grid_;
  next.generators[g].p_mw *= action_raises(action) ? cfg_.increase_factor : cfg_.decrease_factor;
  ++steps_;

  StepResult r;
  const auto sol = problem_->solver().solve(next, &state_.voltages);
  const double terminal = kTerminalReward * cfg_.weights.terminal;
  if (!sol.converged) {
    r.reward = -terminal;
    r.terminal = true;
    r.cause = Termination::divergence;
    done_ = true;
    return r;
  }

  grid_ = std::move(next);
  state_ = make_state(sol, grid_, *problem_);
  const Task& t = task();
  r.reward_pf = task_pf_reward(*problem_, t, state_.interface_flows_mw);
  r.reward_ed = reward_ed(grid_, sol.gen_p_mw);

  const std::size_t slack = grid_.slack_generator_index();
  const double slack_p = sol.gen_p_mw(static_cast<Eigen::Index>(slack));
  const auto& slack_gen = grid_.generators[slack];
  if (slack_p < slack_gen.p_min_mw || slack_p > slack_gen.p_max_mw) {
    r.reward = -terminal;
    r.terminal = true;
    r.cause = Termination::slack_overload;
  } else if (!is_insecure(state_.interface_flows_mw, *problem_, t)) {
    r.reward = terminal;
    r.terminal = true;
    r.cause = Termination::success;
  } else {
    r.reward = cfg_.weights.pf * r.reward_pf + cfg_.weights.ed * r.reward_ed;
    if (steps_ >= cfg_.horizon) {
      r.terminal = true;
      r.cause = Termination::horizon;
    }
  }
  done_ = r.terminal;
  return r;
}

}  // namespace mamgrid::env
