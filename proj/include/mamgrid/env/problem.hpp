#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mamgrid/powergrid/case.hpp"
#include "mamgrid/powergrid/interface.hpp"
#include "mamgrid/powergrid/power_flow.hpp"

namespace mamgrid::env {

/// Caller broke an operation's precondition (masked action, secure
/// scenario handed to reset, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class TaskKind { single, multi };

/// An adjustment task: one or more interfaces that must all end in range.
/// Interfaces are positions in Problem::interfaces.
struct Task {
  std::string id;
  std::vector<std::size_t> interfaces;

  TaskKind kind() const { return interfaces.size() == 1 ? TaskKind::single : TaskKind::multi; }
};

/// Grid, interface catalogue and task catalogue bound together with the
/// shared power-flow solver for the topology. Immutable; shared by every
/// environment, trainer and evaluator working on the same grid.
class Problem {
 public:
  Problem(powergrid::GridCase grid, std::vector<powergrid::TransmissionInterface> interfaces, std::vector<Task> tasks,
          powergrid::PowerFlowOptions options = {});

  const powergrid::GridCase& grid() const { return grid_; }
  const std::vector<powergrid::TransmissionInterface>& interfaces() const { return interfaces_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  const powergrid::PowerFlowSolver& solver() const { return solver_; }

  std::size_t bus_count() const { return grid_.buses.size(); }
  std::size_t line_count() const { return grid_.lines.size(); }
  /// Generator positions (into grid().generators) that own action slots.
  const std::vector<std::size_t>& controllable() const { return controllable_; }
  std::size_t action_count() const { return 2 * controllable_.size(); }

  /// Binary bus adjacency, symmetric with zero diagonal.
  const Eigen::MatrixXd& adjacency() const { return adjacency_; }

  std::size_t task_index(const std::string& id) const;
  std::size_t interface_index(const std::string& id) const;

  /// Hash over topology, controllable set, interface catalogue and tasks.
  std::uint64_t fingerprint() const;

 private:
  powergrid::GridCase grid_;
  std::vector<powergrid::TransmissionInterface> interfaces_;
  std::vector<Task> tasks_;
  powergrid::PowerFlowSolver solver_;
  std::vector<std::size_t> controllable_;
  Eigen::MatrixXd adjacency_;
};

/// One single-interface task per interface, ids equal to interface ids.
std::vector<Task> single_interface_tasks(const std::vector<powergrid::TransmissionInterface>& interfaces);

/// Task file: JSON list of {task_id, interface_ids}. Enforces distinct ids,
/// M >= 1 and, for multi-interface tasks, M below the catalogue size.
std::vector<Task> tasks_from_json(const nlohmann::json& doc,
                                  const std::vector<powergrid::TransmissionInterface>& interfaces);
nlohmann::json tasks_to_json(const std::vector<Task>& tasks,
                             const std::vector<powergrid::TransmissionInterface>& interfaces);

/// Loads case (JSON or MATPOWER by extension), interfaces and optional tasks.
std::shared_ptr<const Problem> load_problem(const std::string& case_path, const std::string& interfaces_path,
                                            const std::string& tasks_path = {});

powergrid::GridCase load_any_case(const std::string& path);

}  // namespace mamgrid::env
