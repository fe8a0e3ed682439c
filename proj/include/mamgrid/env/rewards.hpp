#pragma once

#include <span>

#include <Eigen/Dense>

#include "mamgrid/powergrid/case.hpp"
#include "mamgrid/powergrid/interface.hpp"

namespace mamgrid::env {

/// Negative distance of the interface flow from the centre of its band.
double reward_pf_single(double flow_mw, const powergrid::TransmissionInterface& iface);

/// Worst-case (minimum) single-interface reward. Throws ContractError on
/// empty or misaligned input.
double reward_pf_multi(std::span<const double> flows_mw,
                       std::span<const powergrid::TransmissionInterface* const> ifaces);

/// Negative total quadratic production cost over every generator, using the
/// given productions (one per generator, MW).
double reward_ed(const powergrid::GridCase& grid, const Eigen::VectorXd& gen_p_mw);

/// Same, using the set-points stored in the case.
double reward_ed(const powergrid::GridCase& grid);

/// Weights of the composed reward w_pf * R_pf + w_ed * R_ed; terminal
/// outcomes pay +-100 * terminal.
struct RewardWeights {
  double pf = 1.0;
  double ed = 0.0;
  double terminal = 1.0;
};

inline constexpr double kTerminalReward = 100.0;

}  // namespace mamgrid::env
