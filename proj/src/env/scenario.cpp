#include "mamgrid/env/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <random>
#include <thread>

namespace mamgrid::env {

using nlohmann::json;
using powergrid::CaseError;
using powergrid::GridCase;

namespace {

std::pair<std::string, int> split_element(const std::string& element) {
  const auto colon = element.find(':');
  if (colon == std::string::npos) throw CaseError("scenario override: malformed element '" + element + "'");
  try {
    return {element.substr(0, colon), std::stoi(element.substr(colon + 1))};
  } catch (const std::exception&) {
    throw CaseError("scenario override: malformed element '" + element + "'");
  }
}

std::mt19937_64 attempt_rng(std::uint64_t seed, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(attempt), static_cast<std::uint32_t>(attempt >> 32)};
  return std::mt19937_64(seq);
}

std::size_t pick_count(double fraction, std::size_t population) {
  if (population == 0) return 0;
  const auto n = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(population)));
  return std::clamp<std::size_t>(n, 1, population);
}

std::string format_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "scn-" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

// One draw; returns the scenario (without id) if it converges and is
// insecure for at least one task.
std::optional<Scenario> draw(const Problem& problem, const ScenarioConfig& cfg, std::mt19937_64& rng) {
  const GridCase& base = problem.grid();
  std::uniform_int_distribution<std::size_t> pick_multiplier(0, cfg.multipliers.size() - 1);

  Scenario scenario;
  scenario.base_case = base.name;

  std::vector<std::size_t> loads(base.loads.size());
  std::iota(loads.begin(), loads.end(), std::size_t{0});
  std::vector<std::size_t> chosen_loads;
  std::sample(loads.begin(), loads.end(), std::back_inserter(chosen_loads), pick_count(cfg.fraction, loads.size()),
              rng);
  for (std::size_t l : chosen_loads) {
    const double m = cfg.multipliers[pick_multiplier(rng)];
    const auto& load = base.loads[l];
    const std::string element = "load:" + std::to_string(load.id);
    scenario.overrides.push_back({element, "p_mw", load.p_mw * m});
    scenario.overrides.push_back({element, "q_mvar", load.q_mvar * m});
  }

  const auto& gens = problem.controllable();
  std::vector<std::size_t> chosen_gens;
  std::sample(gens.begin(), gens.end(), std::back_inserter(chosen_gens), pick_count(cfg.fraction, gens.size()), rng);
  for (std::size_t g : chosen_gens) {
    const double m = cfg.multipliers[pick_multiplier(rng)];
    const auto& gen = base.generators[g];
    const double p = std::clamp(gen.p_mw * m, gen.p_min_mw, gen.p_max_mw);
    scenario.overrides.push_back({"generator:" + std::to_string(gen.id), "p_mw", p});
  }

  const GridCase perturbed = apply_scenario(base, scenario);
  const auto sol = problem.solver().solve(perturbed);
  if (!sol.converged) return std::nullopt;
  if (cfg.reject_slack_overload) {
    const std::size_t slack = perturbed.slack_generator_index();
    const double p = sol.gen_p_mw(static_cast<Eigen::Index>(slack));
    const auto& gen = perturbed.generators[slack];
    if (p < gen.p_min_mw || p > gen.p_max_mw) return std::nullopt;
  }
  const std::vector<double> flows = all_interface_flows(sol, problem);
  for (const Task& task : problem.tasks()) {
    if (is_insecure(flows, problem, task)) scenario.insecure_tasks.push_back(task.id);
  }
  if (scenario.insecure_tasks.empty()) return std::nullopt;
  return scenario;
}

}  // namespace

GridCase apply_scenario(const GridCase& base, const Scenario& scenario) {
  GridCase grid = base;
  for (const Override& o : scenario.overrides) {
    const auto [kind, id] = split_element(o.element);
    if (kind == "load") {
      auto& load = grid.loads[grid.load_index(id)];
      if (o.field == "p_mw") {
        load.p_mw = o.value;
      } else if (o.field == "q_mvar") {
        load.q_mvar = o.value;
      } else {
        throw CaseError("scenario override: unknown load field '" + o.field + "'");
      }
    } else if (kind == "generator") {
      auto& gen = grid.generators[grid.generator_index(id)];
      if (o.field == "p_mw") {
        gen.p_mw = std::clamp(o.value, gen.p_min_mw, gen.p_max_mw);
      } else {
        throw CaseError("scenario override: unknown generator field '" + o.field + "'");
      }
    } else {
      throw CaseError("scenario override: unknown element kind '" + kind + "'");
    }
  }
  return grid;
}

std::vector<double> all_interface_flows(const powergrid::PowerFlowSolution& sol, const Problem& problem) {
  std::vector<double> flows;
  flows.reserve(problem.interfaces().size());
  for (const auto& iface : problem.interfaces()) flows.push_back(powergrid::interface_flow(sol, iface, problem.grid()));
  return flows;
}

bool is_insecure(std::span<const double> interface_flows_mw, const Problem& problem, const Task& task) {
  return std::any_of(task.interfaces.begin(), task.interfaces.end(), [&](std::size_t k) {
    return !problem.interfaces()[k].contains(interface_flows_mw[k]);
  });
}

bool is_insecure(const powergrid::PowerFlowSolution& sol, const Problem& problem, const Task& task) {
  const auto flows = all_interface_flows(sol, problem);
  return is_insecure(flows, problem, task);
}

std::vector<double> default_multipliers() {
  std::vector<double> m;
  for (int k = 1; k <= 20; ++k) m.push_back(k / 10.0);
  return m;
}

std::vector<Scenario> generate_scenarios(const Problem& problem, const ScenarioConfig& cfg, std::uint64_t seed) {
  if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw ContractError("generate_scenarios: fraction must be in (0, 1]");
  if (cfg.multipliers.empty()) throw ContractError("generate_scenarios: empty multiplier grid");

  const std::size_t budget = cfg.max_attempts > 0 ? cfg.max_attempts : 50 * std::max<std::size_t>(cfg.count, 1);
  const unsigned workers = std::max(1u, cfg.workers);
  const std::size_t chunk = 64 * workers;

  std::vector<Scenario> out;
  for (std::size_t start = 0; start < budget && out.size() < cfg.count; start += chunk) {
    const std::size_t stop = std::min(budget, start + chunk);
    std::vector<std::optional<Scenario>> results(stop - start);
    auto run = [&](unsigned w) {
      for (std::size_t a = start + w; a < stop; a += workers) {
        auto rng = attempt_rng(seed, a);
        results[a - start] = draw(problem, cfg, rng);
      }
    };
    if (workers == 1) {
      run(0);
    } else {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    }
    for (auto& r : results) {
      if (!r || out.size() >= cfg.count) continue;
      r->scenario_id = format_id(out.size());
      out.push_back(std::move(*r));
    }
  }
  return out;
}

ScenarioSplit split_scenarios(std::vector<Scenario> scenarios, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ContractError("split: fraction must be in [0, 1]");
  std::mt19937_64 rng(seed);
  std::shuffle(scenarios.begin(), scenarios.end(), rng);
  const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(scenarios.size())));
  ScenarioSplit split;
  split.train.assign(scenarios.begin(), scenarios.begin() + static_cast<long>(cut));
  split.test.assign(scenarios.begin() + static_cast<long>(cut), scenarios.end());
  return split;
}

json scenarios_to_json(const std::vector<Scenario>& scenarios) {
  json doc = json::array();
  for (const Scenario& s : scenarios) {
    json overrides = json::array();
    for (const Override& o : s.overrides) {
      overrides.push_back({{"element", o.element}, {"field", o.field}, {"value", o.value}});
    }
    doc.push_back({{"scenario_id", s.scenario_id},
                   {"base_case", s.base_case},
                   {"overrides", std::move(overrides)},
                   {"insecure_tasks", s.insecure_tasks}});
  }
  return doc;
}

std::vector<Scenario> scenarios_from_json(const json& doc) {
  if (!doc.is_array()) throw CaseError("scenarios: expected a JSON array");
  std::vector<Scenario> out;
  try {
    for (const json& item : doc) {
      Scenario s;
      s.scenario_id = item.at("scenario_id").get<std::string>();
      s.base_case = item.value("base_case", std::string{});
      for (const json& o : item.at("overrides")) {
        s.overrides.push_back(
            {o.at("element").get<std::string>(), o.at("field").get<std::string>(), o.at("value").get<double>()});
      }
      s.insecure_tasks = item.at("insecure_tasks").get<std::vector<std::string>>();
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw CaseError(std::string("scenarios: ") + e.what());
  }
  return out;
}

std::vector<Scenario> load_scenarios_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open scenario file '" + path + "'");
  try {
    return scenarios_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw CaseError(std::string("scenarios: invalid JSON: ") + e.what());
  }
}

void save_scenarios_file(const std::vector<Scenario>& scenarios, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write scenario file '" + path + "'");
  out << scenarios_to_json(scenarios).dump(1) << '\n';
}

}  // namespace mamgrid::env
