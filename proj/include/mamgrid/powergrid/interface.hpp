#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mamgrid/powergrid/case.hpp"
#include "mamgrid/powergrid/power_flow.hpp"

namespace mamgrid::powergrid {

struct InterfaceLine {
  int line_id = 0;
  int sign = 1;  // +1: from->to is the monitored direction
};

/// A monitored cut of lines with its pre-scheduled active-flow band [MW].
struct TransmissionInterface {
  std::string id;
  std::vector<InterfaceLine> lines;
  double sigma_minus = 0.0;
  double sigma_plus = 0.0;

  double midpoint() const { return 0.5 * (sigma_minus + sigma_plus); }
  bool contains(double flow_mw) const { return flow_mw >= sigma_minus && flow_mw <= sigma_plus; }
};

/// Throws CaseError if the band is empty, the line set is empty or a line
/// id is unknown to `grid`.
void validate(const TransmissionInterface& iface, const GridCase& grid);

std::vector<TransmissionInterface> interfaces_from_json(const nlohmann::json& doc);
nlohmann::json interfaces_to_json(const std::vector<TransmissionInterface>& ifaces);
std::vector<TransmissionInterface> load_interfaces_file(const std::string& path, const GridCase& grid);

/// Sum of signed sending-end active flows [MW] over the interface lines.
double interface_flow(const PowerFlowSolution& sol, const TransmissionInterface& iface, const GridCase& grid);

}  // namespace mamgrid::powergrid
