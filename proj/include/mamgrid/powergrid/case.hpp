#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mamgrid::powergrid {

/// Raised for malformed or invariant-violating case data. The message names
/// the offending field.
class CaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BusType { slack, pv, pq };

std::string_view to_string(BusType type);
BusType bus_type_from_string(std::string_view text);

struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double base_kv = 0.0;
  double vm = 1.0;       // initial magnitude, p.u.
  double va_deg = 0.0;   // initial angle
  double gs_mw = 0.0;    // shunt conductance, MW at V = 1 p.u.
  double bs_mvar = 0.0;  // shunt susceptance, MVAr at V = 1 p.u.
};

struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;  // p.u.
  double x = 0.0;  // p.u.
  double b = 0.0;  // total line charging, p.u.
  double rate_mva = 0.0;
  double tap = 1.0;  // off-nominal ratio at the from side; 1 for plain lines
  double shift_deg = 0.0;
};

/// Quadratic production cost alpha*P^2 + beta*P + lambda, P in MW.
struct CostCurve {
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;

  double operator()(double p_mw) const { return (alpha * p_mw + beta) * p_mw + lambda; }
};

struct Generator {
  int id = 0;
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
  double p_min_mw = 0.0;
  double p_max_mw = 0.0;
  double q_min_mvar = -1e9;
  double q_max_mvar = 1e9;
  double v_setpoint = 1.0;
  CostCurve cost;
  bool controllable = false;
};

struct Load {
  int id = 0;
  int bus = 0;
  double p_mw = 0.0;
  double q_mvar = 0.0;
};

/// Static grid description. Immutable once validated; environments copy it
/// and mutate set-points on the copy.
struct GridCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Load> loads;

  std::size_t bus_index(int bus_id) const;
  std::size_t line_index(int line_id) const;
  std::size_t generator_index(int gen_id) const;
  std::size_t load_index(int load_id) const;

  std::size_t slack_bus_index() const;
  /// First generator attached to the slack bus.
  std::size_t slack_generator_index() const;
};

/// Checks every GridCase invariant and throws CaseError on the first failure.
void validate(const GridCase& grid);

GridCase parse_case(std::string_view json_text);
GridCase case_from_json(const nlohmann::json& doc);
nlohmann::json case_to_json(const GridCase& grid);

GridCase load_case_file(const std::string& path);
void save_case_file(const GridCase& grid, const std::string& path);

/// Stable 64-bit fingerprint of the network topology (bus ids, line
/// endpoints, controllable generator set). Models are bound to it.
std::uint64_t topology_hash(const GridCase& grid);

}  // namespace mamgrid::powergrid
