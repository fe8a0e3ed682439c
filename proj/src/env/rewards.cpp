#include "mamgrid/env/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mamgrid/env/problem.hpp"

namespace mamgrid::env {

double reward_pf_single(double flow_mw, const powergrid::TransmissionInterface& iface) {
  return -std::abs(flow_mw - iface.midpoint());
}

double reward_pf_multi(std::span<const double> flows_mw,
                       std::span<const powergrid::TransmissionInterface* const> ifaces) {
  if (flows_mw.empty()) throw ContractError("reward_pf_multi: empty interface list");
  if (flows_mw.size() != ifaces.size()) throw ContractError("reward_pf_multi: flows and interfaces differ in length");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < flows_mw.size(); ++m) worst = std::min(worst, reward_pf_single(flows_mw[m], *ifaces[m]));
  return worst;
}

double reward_ed(const powergrid::GridCase& grid, const Eigen::VectorXd& gen_p_mw) {
  if (static_cast<std::size_t>(gen_p_mw.size()) != grid.generators.size()) {
    throw ContractError("reward_ed: one production per generator expected");
  }
  double cost = 0.0;
  for (std::size_t g = 0; g < grid.generators.size(); ++g) {
    cost += grid.generators[g].cost(gen_p_mw(static_cast<Eigen::Index>(g)));
  }
  return -cost;
}

double reward_ed(const powergrid::GridCase& grid) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(grid.generators.size()));
  for (std::size_t g = 0; g < grid.generators.size(); ++g) p(static_cast<Eigen::Index>(g)) = grid.generators[g].p_mw;
  return reward_ed(grid, p);
}

}  // namespace mamgrid::env
