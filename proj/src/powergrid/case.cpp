#include "mamgrid/powergrid/case.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "mamgrid/util/hash.hpp"

namespace mamgrid::powergrid {

using nlohmann::json;

std::string_view to_string(BusType type) {
  switch (type) {
    case BusType::slack: return "slack";
    case BusType::pv: return "pv";
    case BusType::pq: return "pq";
  }
  return "pq";
}

BusType bus_type_from_string(std::string_view text) {
  if (text == "slack") return BusType::slack;
  if (text == "pv") return BusType::pv;
  if (text == "pq") return BusType::pq;
  throw CaseError("unknown bus type '" + std::string(text) + "'");
}

namespace {

template <class Seq>
std::size_t find_by_id(const Seq& items, int id, const char* what) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id == id) return i;
  }
  throw CaseError(std::string("unknown ") + what + " id " + std::to_string(id));
}

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw CaseError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw CaseError(path + "." + key + ": missing field");
  return *it;
}

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number()) throw CaseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  return number(obj, key, path);
}

int integer(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number_integer()) throw CaseError(path + "." + key + ": expected an integer");
  return v.get<int>();
}

const json& array(const json& obj, const char* key) {
  const json& v = member(obj, key, "case");
  if (!v.is_array()) throw CaseError(std::string("case.") + key + ": expected an array");
  return v;
}

std::string at(const char* list, std::size_t i) {
  return std::string(list) + "[" + std::to_string(i) + "]";
}

}  // namespace

std::size_t GridCase::bus_index(int bus_id) const { return find_by_id(buses, bus_id, "bus"); }
std::size_t GridCase::line_index(int line_id) const { return find_by_id(lines, line_id, "line"); }
std::size_t GridCase::generator_index(int gen_id) const {
  return find_by_id(generators, gen_id, "generator");
}
std::size_t GridCase::load_index(int load_id) const { return find_by_id(loads, load_id, "load"); }

std::size_t GridCase::slack_bus_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].type == BusType::slack) return i;
  }
  throw CaseError("buses: missing slack bus");
}

std::size_t GridCase::slack_generator_index() const {
  const int slack_id = buses[slack_bus_index()].id;
  for (std::size_t g = 0; g < generators.size(); ++g) {
    if (generators[g].bus == slack_id) return g;
  }
  throw CaseError("generators: no generator at slack bus " + std::to_string(slack_id));
}

void validate(const GridCase& grid) {
  if (!(grid.base_mva > 0.0)) throw CaseError("base_mva: must be positive");
  if (grid.buses.empty()) throw CaseError("buses: empty bus list");

  std::set<int> bus_ids;
  int slack_count = 0;
  for (std::size_t i = 0; i < grid.buses.size(); ++i) {
    const Bus& b = grid.buses[i];
    if (!bus_ids.insert(b.id).second) {
      throw CaseError(at("buses", i) + ".id: duplicate bus id " + std::to_string(b.id));
    }
    if (b.type == BusType::slack) ++slack_count;
  }
  if (slack_count == 0) throw CaseError("buses: missing slack bus");
  if (slack_count > 1) throw CaseError("buses: multiple slack buses");

  std::set<int> line_ids;
  for (std::size_t i = 0; i < grid.lines.size(); ++i) {
    const Line& l = grid.lines[i];
    if (!line_ids.insert(l.id).second) {
      throw CaseError(at("lines", i) + ".id: duplicate line id " + std::to_string(l.id));
    }
    if (!bus_ids.contains(l.from_bus)) {
      throw CaseError(at("lines", i) + ".from: unknown bus " + std::to_string(l.from_bus));
    }
    if (!bus_ids.contains(l.to_bus)) {
      throw CaseError(at("lines", i) + ".to: unknown bus " + std::to_string(l.to_bus));
    }
    if (l.from_bus == l.to_bus) throw CaseError(at("lines", i) + ": self-loop line");
    if (!(l.tap > 0.0)) throw CaseError(at("lines", i) + ".tap: must be positive");
  }

  std::set<int> gen_ids;
  const int slack_id = grid.buses[grid.slack_bus_index()].id;
  bool slack_has_gen = false;
  for (std::size_t i = 0; i < grid.generators.size(); ++i) {
    const Generator& g = grid.generators[i];
    const std::string path = at("generators", i);
    if (!gen_ids.insert(g.id).second) {
      throw CaseError(path + ".id: duplicate generator id " + std::to_string(g.id));
    }
    if (!bus_ids.contains(g.bus)) throw CaseError(path + ".bus: unknown bus " + std::to_string(g.bus));
    if (g.p_min_mw > g.p_max_mw) throw CaseError(path + ".p_min_mw: exceeds p_max_mw");
    if (g.q_min_mvar > g.q_max_mvar) throw CaseError(path + ".q_min_mvar: exceeds q_max_mvar");
    if (g.p_mw < g.p_min_mw || g.p_mw > g.p_max_mw) {
      throw CaseError(path + ".p_mw: outside [p_min_mw, p_max_mw]");
    }
    if (g.bus == slack_id) {
      slack_has_gen = true;
      if (g.controllable) throw CaseError(path + ".controllable: slack generator cannot be controllable");
    }
  }
  if (!slack_has_gen) throw CaseError("generators: no generator at slack bus");
  for (std::size_t i = 0; i < grid.buses.size(); ++i) {
    const Bus& b = grid.buses[i];
    if (b.type != BusType::pv) continue;
    const bool has_gen = std::any_of(grid.generators.begin(), grid.generators.end(),
                                     [&](const Generator& g) { return g.bus == b.id; });
    if (!has_gen) throw CaseError(at("buses", i) + ".type: pv bus without a generator");
  }

  std::set<int> load_ids;
  for (std::size_t i = 0; i < grid.loads.size(); ++i) {
    const Load& l = grid.loads[i];
    if (!load_ids.insert(l.id).second) {
      throw CaseError(at("loads", i) + ".id: duplicate load id " + std::to_string(l.id));
    }
    if (!bus_ids.contains(l.bus)) {
      throw CaseError(at("loads", i) + ".bus: unknown bus " + std::to_string(l.bus));
    }
  }
}

GridCase case_from_json(const json& doc) {
  if (!doc.is_object()) throw CaseError("case: expected a JSON object");
  GridCase grid;
  if (doc.contains("name") && doc["name"].is_string()) grid.name = doc["name"].get<std::string>();
  grid.base_mva = number(doc, "base_mva", "case");

  const json& buses = array(doc, "buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const json& b = buses[i];
    const std::string path = at("buses", i);
    Bus bus;
    bus.id = integer(b, "id", path);
    const json& type = member(b, "type", path);
    if (!type.is_string()) throw CaseError(path + ".type: expected a string");
    try {
      bus.type = bus_type_from_string(type.get<std::string>());
    } catch (const CaseError& e) {
      throw CaseError(path + ".type: " + e.what());
    }
    bus.base_kv = number_or(b, "base_kv", path, 0.0);
    bus.vm = number_or(b, "vm", path, 1.0);
    bus.va_deg = number_or(b, "va_deg", path, 0.0);
    bus.gs_mw = number_or(b, "gs_mw", path, 0.0);
    bus.bs_mvar = number_or(b, "bs_mvar", path, 0.0);
    grid.buses.push_back(bus);
  }

  const json& lines = array(doc, "lines");
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const json& l = lines[i];
    const std::string path = at("lines", i);
    Line line;
    line.id = integer(l, "id", path);
    line.from_bus = integer(l, "from", path);
    line.to_bus = integer(l, "to", path);
    line.r = number(l, "r", path);
    line.x = number(l, "x", path);
    line.b = number_or(l, "b", path, 0.0);
    line.rate_mva = number_or(l, "rate_mva", path, 0.0);
    line.tap = number_or(l, "tap", path, 1.0);
    line.shift_deg = number_or(l, "shift_deg", path, 0.0);
    grid.lines.push_back(line);
  }

  const json& gens = array(doc, "generators");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const json& g = gens[i];
    const std::string path = at("generators", i);
    Generator gen;
    gen.id = integer(g, "id", path);
    gen.bus = integer(g, "bus", path);
    gen.p_mw = number(g, "p_mw", path);
    gen.q_mvar = number_or(g, "q_mvar", path, 0.0);
    gen.p_min_mw = number(g, "p_min_mw", path);
    gen.p_max_mw = number(g, "p_max_mw", path);
    gen.q_min_mvar = number_or(g, "q_min_mvar", path, -1e9);
    gen.q_max_mvar = number_or(g, "q_max_mvar", path, 1e9);
    gen.v_setpoint = number_or(g, "v_setpoint", path, 1.0);
    if (g.contains("cost")) {
      const json& c = g["cost"];
      const std::string cpath = path + ".cost";
      gen.cost.alpha = number_or(c, "alpha", cpath, 0.0);
      gen.cost.beta = number_or(c, "beta", cpath, 0.0);
      gen.cost.lambda = number_or(c, "lambda", cpath, 0.0);
    }
    if (g.contains("controllable")) {
      if (!g["controllable"].is_boolean()) throw CaseError(path + ".controllable: expected a boolean");
      gen.controllable = g["controllable"].get<bool>();
    }
    grid.generators.push_back(gen);
  }

  const json& loads = array(doc, "loads");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const json& l = loads[i];
    const std::string path = at("loads", i);
    Load load;
    load.id = integer(l, "id", path);
    load.bus = integer(l, "bus", path);
    load.p_mw = number(l, "p_mw", path);
    load.q_mvar = number_or(l, "q_mvar", path, 0.0);
    grid.loads.push_back(load);
  }

  validate(grid);
  return grid;
}

GridCase parse_case(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw CaseError(std::string("case: invalid JSON: ") + e.what());
  }
  return case_from_json(doc);
}

json case_to_json(const GridCase& grid) {
  json doc;
  doc["name"] = grid.name;
  doc["base_mva"] = grid.base_mva;
  json buses = json::array();
  for (const Bus& b : grid.buses) {
    buses.push_back({{"id", b.id},
                     {"type", std::string(to_string(b.type))},
                     {"base_kv", b.base_kv},
                     {"vm", b.vm},
                     {"va_deg", b.va_deg},
                     {"gs_mw", b.gs_mw},
                     {"bs_mvar", b.bs_mvar}});
  }
  json lines = json::array();
  for (const Line& l : grid.lines) {
    lines.push_back({{"id", l.id},
                     {"from", l.from_bus},
                     {"to", l.to_bus},
                     {"r", l.r},
                     {"x", l.x},
                     {"b", l.b},
                     {"rate_mva", l.rate_mva},
                     {"tap", l.tap},
                     {"shift_deg", l.shift_deg}});
  }
  json gens = json::array();
  for (const Generator& g : grid.generators) {
    gens.push_back({{"id", g.id},
                    {"bus", g.bus},
                    {"p_mw", g.p_mw},
                    {"q_mvar", g.q_mvar},
                    {"p_min_mw", g.p_min_mw},
                    {"p_max_mw", g.p_max_mw},
                    {"q_min_mvar", g.q_min_mvar},
                    {"q_max_mvar", g.q_max_mvar},
                    {"v_setpoint", g.v_setpoint},
                    {"cost", {{"alpha", g.cost.alpha}, {"beta", g.cost.beta}, {"lambda", g.cost.lambda}}},
                    {"controllable", g.controllable}});
  }
  json loads = json::array();
  for (const Load& l : grid.loads) {
    loads.push_back({{"id", l.id}, {"bus", l.bus}, {"p_mw", l.p_mw}, {"q_mvar", l.q_mvar}});
  }
  doc["buses"] = std::move(buses);
  doc["lines"] = std::move(lines);
  doc["generators"] = std::move(gens);
  doc["loads"] = std::move(loads);
  return doc;
}

GridCase load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_case(buffer.str());
}

void save_case_file(const GridCase& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file '" + path + "'");
  out << case_to_json(grid).dump(1) << '\n';
}

std::uint64_t topology_hash(const GridCase& grid) {
  util::Fnv1a h;
  h.add(grid.buses.size());
  for (const Bus& b : grid.buses) h.add(b.id);
  h.add(grid.lines.size());
  for (const Line& l : grid.lines) {
    h.add(l.id);
    h.add(l.from_bus);
    h.add(l.to_bus);
  }
  for (const Generator& g : grid.generators) {
    if (!g.controllable) continue;
    h.add(g.id);
    h.add(g.bus);
  }
  return h.value();
}

}  // namespace mamgrid::powergrid
