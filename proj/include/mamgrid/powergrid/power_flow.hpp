#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mamgrid/powergrid/admittance.hpp"
#include "mamgrid/powergrid/case.hpp"

namespace mamgrid::powergrid {

struct PowerFlowOptions {
  double tolerance = 1e-8;  // max |mismatch|, p.u.
  int max_iterations = 30;
  bool enforce_q_limits = true;
  int max_q_limit_rounds = 20;
};

/// Bus voltage phasors used to seed Newton iterations.
struct VoltageProfile {
  Eigen::VectorXd vm;
  Eigen::VectorXd va;  // rad
};

struct PowerFlowSolution {
  bool converged = false;
  int iterations = 0;        // Newton iterations summed over Q-limit rounds
  double max_mismatch = 0.0; // p.u., last evaluated
  bool singular = false;

  Eigen::VectorXd vm;      // p.u.
  Eigen::VectorXd va;      // rad, slack = 0
  Eigen::VectorXd p_mw;    // net injection per bus
  Eigen::VectorXd q_mvar;  // net injection per bus
  Eigen::VectorXd line_p_from_mw;
  Eigen::VectorXd line_p_to_mw;
  Eigen::VectorXd gen_p_mw;
  Eigen::VectorXd gen_q_mvar;
  std::vector<BusType> bus_types;  // after PV->PQ switching

  VoltageProfile voltages() const { return {vm, va}; }
};

/// Polar Newton-Raphson AC power flow. Holds the admittance matrix of one
/// topology, so it can re-solve many set-point variants of the same grid.
/// Instances are immutable after construction and safe to share.
class PowerFlowSolver {
 public:
  explicit PowerFlowSolver(const GridCase& topology, PowerFlowOptions options = {});

  /// `grid` must share the topology given at construction; only set-points
  /// (generation, load) may differ. Never throws on divergence: the result
  /// carries converged = false and the last mismatch.
  PowerFlowSolution solve(const GridCase& grid, const VoltageProfile* warm_start = nullptr) const;

  const AdmittanceMatrix& admittance() const { return admittance_; }
  const PowerFlowOptions& options() const { return options_; }

 private:
  PowerFlowOptions options_;
  AdmittanceMatrix admittance_;
  Eigen::MatrixXcd y_;
  std::vector<BranchAdmittance> branches_;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> branch_ends_;
};

PowerFlowSolution solve_power_flow(const GridCase& grid, const std::optional<VoltageProfile>& warm_start = std::nullopt,
                                   PowerFlowOptions options = {});

/// Active/reactive mismatch of the power-flow equations evaluated directly
/// from the bus voltages (no Jacobian), per bus, p.u.
struct Residuals {
  Eigen::VectorXd dp;
  Eigen::VectorXd dq;
};

/// Recomputes injection residuals for `sol` against the scheduled injections
/// of `grid` (generator P/Q from the solution). Slack entries and the Q entry
/// of PV buses are zero by construction of the schedule.
Residuals power_flow_residuals(const GridCase& grid, const PowerFlowSolution& sol);

}  // namespace mamgrid::powergrid
