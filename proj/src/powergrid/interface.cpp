#include "mamgrid/powergrid/interface.hpp"

#include <fstream>
#include <set>

namespace mamgrid::powergrid {

using nlohmann::json;

void validate(const TransmissionInterface& iface, const GridCase& grid) {
  const std::string where = "interface '" + iface.id + "'";
  if (iface.lines.empty()) throw CaseError(where + ".lines: empty line set");
  if (!(iface.sigma_minus < iface.sigma_plus)) throw CaseError(where + ": sigma_minus must be below sigma_plus");
  std::set<int> seen;
  for (const InterfaceLine& l : iface.lines) {
    if (l.sign != 1 && l.sign != -1) throw CaseError(where + ".lines: sign must be +1 or -1");
    if (!seen.insert(l.line_id).second) {
      throw CaseError(where + ".lines: duplicate line " + std::to_string(l.line_id));
    }
    try {
      (void)grid.line_index(l.line_id);
    } catch (const CaseError&) {
      throw CaseError(where + ".lines: unknown line id " + std::to_string(l.line_id));
    }
  }
}

std::vector<TransmissionInterface> interfaces_from_json(const json& doc) {
  if (!doc.is_array()) throw CaseError("interfaces: expected a JSON array");
  std::vector<TransmissionInterface> out;
  std::set<std::string> ids;
  for (const json& item : doc) {
    TransmissionInterface iface;
    try {
      iface.id = item.at("id").get<std::string>();
      for (const json& l : item.at("lines")) {
        iface.lines.push_back({l.at("line_id").get<int>(), l.value("sign", 1)});
      }
      iface.sigma_minus = item.at("sigma_minus").get<double>();
      iface.sigma_plus = item.at("sigma_plus").get<double>();
    } catch (const json::exception& e) {
      throw CaseError(std::string("interfaces: ") + e.what());
    }
    if (!ids.insert(iface.id).second) throw CaseError("interfaces: duplicate id '" + iface.id + "'");
    out.push_back(std::move(iface));
  }
  return out;
}

json interfaces_to_json(const std::vector<TransmissionInterface>& ifaces) {
  json doc = json::array();
  for (const auto& iface : ifaces) {
    json lines = json::array();
    for (const auto& l : iface.lines) lines.push_back({{"line_id", l.line_id}, {"sign", l.sign}});
    doc.push_back({{"id", iface.id},
                   {"lines", std::move(lines)},
                   {"sigma_minus", iface.sigma_minus},
                   {"sigma_plus", iface.sigma_plus}});
  }
  return doc;
}

std::vector<TransmissionInterface> load_interfaces_file(const std::string& path, const GridCase& grid) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open interface file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CaseError("interfaces: invalid JSON: " + std::string(e.what()));
  }
  auto ifaces = interfaces_from_json(doc);
  for (const auto& iface : ifaces) validate(iface, grid);
  return ifaces;
}

double interface_flow(const PowerFlowSolution& sol, const TransmissionInterface& iface, const GridCase& grid) {
  double total = 0.0;
  for (const InterfaceLine& l : iface.lines) {
    std::size_t k = 0;
    try {
      k = grid.line_index(l.line_id);
    } catch (const CaseError&) {
      throw CaseError("interface '" + iface.id + "': unknown line id " + std::to_string(l.line_id));
    }
    total += l.sign * sol.line_p_from_mw(static_cast<Eigen::Index>(k));
  }
  return total;
}

}  // namespace mamgrid::powergrid
