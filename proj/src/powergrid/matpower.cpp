#include "mamgrid/powergrid/matpower.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace mamgrid::powergrid {

namespace {

using Rows = std::vector<std::vector<double>>;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  bool in_string = false;
  for (char c : text) {
    if (c == '\n') {
      in_comment = false;
      in_string = false;
      out.push_back(c);
      continue;
    }
    if (in_comment) continue;
    if (c == '\'') in_string = !in_string;
    if (c == '%' && !in_string) {
      in_comment = true;
      continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<std::size_t> find_assignment(const std::string& text, std::string_view field) {
  const std::string key = "mpc." + std::string(field);
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    std::size_t after = pos + key.size();
    while (after < text.size() && (text[after] == ' ' || text[after] == '\t')) ++after;
    if (after < text.size() && text[after] == '=') return after + 1;
    pos = after;
  }
  return std::nullopt;
}

double parse_number(std::string_view token, std::string_view field) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    if (token == "Inf" || token == "inf") return 1e10;
    if (token == "-Inf" || token == "-inf") return -1e10;
    throw CaseError("mpc." + std::string(field) + ": bad number '" + std::string(token) + "'");
  }
  return value;
}

double scalar(const std::string& text, std::string_view field) {
  auto start = find_assignment(text, field);
  if (!start) throw CaseError("mpc." + std::string(field) + ": missing");
  auto stop = text.find(';', *start);
  std::string token = text.substr(*start, stop - *start);
  token.erase(std::remove_if(token.begin(), token.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
              token.end());
  return parse_number(token, field);
}

std::optional<Rows> matrix(const std::string& text, std::string_view field) {
  auto start = find_assignment(text, field);
  if (!start) return std::nullopt;
  auto open = text.find('[', *start);
  auto close = text.find(']', open);
  if (open == std::string::npos || close == std::string::npos) {
    throw CaseError("mpc." + std::string(field) + ": unterminated matrix");
  }
  Rows rows;
  std::vector<double> row;
  std::string token;
  auto flush_token = [&] {
    if (!token.empty()) {
      row.push_back(parse_number(token, field));
      token.clear();
    }
  };
  auto flush_row = [&] {
    flush_token();
    if (!row.empty()) {
      if (!rows.empty() && rows.front().size() != row.size()) {
        throw CaseError("mpc." + std::string(field) + ": ragged row " + std::to_string(rows.size() + 1));
      }
      rows.push_back(std::move(row));
      row.clear();
    }
  };
  for (std::size_t i = open + 1; i < close; ++i) {
    const char c = text[i];
    if (c == ';' || c == '\n') {
      flush_row();
    } else if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_row();
  return rows;
}

void require_columns(const Rows& rows, std::size_t count, std::string_view field) {
  for (const auto& r : rows) {
    if (r.size() < count) {
      throw CaseError("mpc." + std::string(field) + ": expected at least " + std::to_string(count) + " columns");
    }
  }
}

}  // namespace

GridCase parse_matpower(std::string_view raw, std::string name) {
  const std::string text = strip_comments(raw);
  GridCase grid;
  grid.name = std::move(name);
  grid.base_mva = scalar(text, "baseMVA");

  auto bus_rows = matrix(text, "bus");
  auto gen_rows = matrix(text, "gen");
  auto branch_rows = matrix(text, "branch");
  if (!bus_rows) throw CaseError("mpc.bus: missing");
  if (!gen_rows) throw CaseError("mpc.gen: missing");
  if (!branch_rows) throw CaseError("mpc.branch: missing");
  require_columns(*bus_rows, 13, "bus");
  require_columns(*gen_rows, 10, "gen");
  require_columns(*branch_rows, 11, "branch");
  auto cost_rows = matrix(text, "gencost");

  std::map<int, int> online_gens;
  for (const auto& g : *gen_rows) {
    if (g[7] > 0) ++online_gens[static_cast<int>(g[0])];
  }

  int load_id = 1;
  for (const auto& b : *bus_rows) {
    Bus bus;
    bus.id = static_cast<int>(b[0]);
    switch (static_cast<int>(b[1])) {
      case 1: bus.type = BusType::pq; break;
      case 2: bus.type = online_gens.contains(bus.id) ? BusType::pv : BusType::pq; break;
      case 3: bus.type = BusType::slack; break;
      default:
        throw CaseError("mpc.bus: unsupported bus type " + std::to_string(static_cast<int>(b[1])) + " at bus " +
                        std::to_string(bus.id));
    }
    bus.gs_mw = b[4];
    bus.bs_mvar = b[5];
    bus.vm = b[7];
    bus.va_deg = b[8];
    bus.base_kv = b[9];
    grid.buses.push_back(bus);
    if (b[2] != 0.0 || b[3] != 0.0) {
      grid.loads.push_back(Load{load_id++, bus.id, b[2], b[3]});
    }
  }

  int slack_id = 0;
  for (const Bus& b : grid.buses) {
    if (b.type == BusType::slack) slack_id = b.id;
  }

  int gen_id = 1;
  for (std::size_t k = 0; k < gen_rows->size(); ++k) {
    const auto& g = (*gen_rows)[k];
    if (g[7] <= 0) continue;
    Generator gen;
    gen.id = gen_id++;
    gen.bus = static_cast<int>(g[0]);
    gen.q_mvar = g[2];
    gen.q_max_mvar = g[3];
    gen.q_min_mvar = g[4];
    gen.v_setpoint = g[5];
    gen.p_max_mw = g[8];
    gen.p_min_mw = g[9];
    gen.p_mw = std::clamp(g[1], gen.p_min_mw, std::max(gen.p_min_mw, gen.p_max_mw));
    gen.controllable = gen.bus != slack_id && gen.p_max_mw > gen.p_min_mw && gen.p_mw > 0.0;
    if (cost_rows && k < cost_rows->size()) {
      const auto& c = (*cost_rows)[k];
      if (c.size() < 4 || static_cast<int>(c[0]) != 2) {
        throw CaseError("mpc.gencost: only polynomial (model 2) costs are supported");
      }
      const auto n = static_cast<std::size_t>(c[3]);
      if (c.size() < 4 + n) throw CaseError("mpc.gencost: row " + std::to_string(k + 1) + " too short");
      std::vector<double> coeffs(c.begin() + 4, c.begin() + 4 + static_cast<long>(n));
      if (n > 3) throw CaseError("mpc.gencost: polynomial degree above 2 is not supported");
      // highest order first
      if (n >= 1) gen.cost.lambda = coeffs[n - 1];
      if (n >= 2) gen.cost.beta = coeffs[n - 2];
      if (n >= 3) gen.cost.alpha = coeffs[n - 3];
    }
    grid.generators.push_back(gen);
  }

  int line_id = 1;
  for (const auto& r : *branch_rows) {
    if (r[10] <= 0) continue;
    Line line;
    line.id = line_id++;
    line.from_bus = static_cast<int>(r[0]);
    line.to_bus = static_cast<int>(r[1]);
    line.r = r[2];
    line.x = r[3];
    line.b = r[4];
    line.rate_mva = r[5];
    line.tap = r[8] == 0.0 ? 1.0 : r[8];
    line.shift_deg = r[9];
    grid.lines.push_back(line);
  }

  validate(grid);
  return grid;
}

GridCase load_matpower_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open MATPOWER file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_matpower(buffer.str(), std::filesystem::path(path).stem().string());
}

}  // namespace mamgrid::powergrid
