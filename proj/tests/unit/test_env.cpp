#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include <json.hpp>

#include "mamgrid/env/environment.hpp"
#include "mamgrid/env/problem.hpp"
#include "mamgrid/env/rewards.hpp"
#include "mamgrid/env/scenario.hpp"
#include "mamgrid/powergrid/matpower.hpp"

using namespace mamgrid;
using namespace mamgrid::env;
using nlohmann::json;
using powergrid::GridCase;
using powergrid::TransmissionInterface;

namespace {

TransmissionInterface band(double lo, double hi, const std::string& id = "phi1") {
  TransmissionInterface f;
  f.id = id;
  f.lines = {{1, 1}};
  f.sigma_minus = lo;
  f.sigma_plus = hi;
  return f;
}

// Slack at bus 1 feeds a load at bus 2 over one lossless line; a
// controllable generator at bus 2 offsets part of the load. The interface
// is the line itself, so its flow is load - local generation exactly.
GridCase feeder(double load_mw, double gen_mw, double x = 0.1, double slack_pmax = 500.0) {
  json doc{{"name", "feeder"},
           {"base_mva", 100.0},
           {"buses", {{{"id", 1}, {"type", "slack"}}, {{"id", 2}, {"type", "pv"}}}},
           {"lines", {{{"id", 1}, {"from", 1}, {"to", 2}, {"r", 0.0}, {"x", x}}}},
           {"generators",
            {{{"id", 1},
              {"bus", 1},
              {"p_mw", 0.0},
              {"p_min_mw", 0.0},
              {"p_max_mw", slack_pmax},
              {"v_setpoint", 1.0},
              {"cost", {{"alpha", 0.01}, {"beta", 10.0}, {"lambda", 5.0}}}},
             {{"id", 2},
              {"bus", 2},
              {"p_mw", gen_mw},
              {"p_min_mw", 10.0},
              {"p_max_mw", 100.0},
              {"v_setpoint", 1.0},
              {"cost", {{"alpha", 0.02}, {"beta", 20.0}, {"lambda", 0.0}}},
              {"controllable", true}}}},
           {"loads", {{{"id", 1}, {"bus", 2}, {"p_mw", load_mw}, {"q_mvar", 0.0}}}}};
  return powergrid::case_from_json(doc);
}

std::shared_ptr<const Problem> feeder_problem(GridCase grid, TransmissionInterface iface) {
  std::vector<TransmissionInterface> ifaces{std::move(iface)};
  auto tasks = single_interface_tasks(ifaces);
  return std::make_shared<const Problem>(std::move(grid), std::move(ifaces), std::move(tasks));
}

Scenario unperturbed(std::vector<std::string> insecure = {"phi1"}) {
  return Scenario{"s0", "feeder", {}, std::move(insecure)};
}

std::shared_ptr<const Problem> ieee14_problem() {
  GridCase grid = powergrid::load_matpower_file(std::string(MAMGRID_DATA_DIR) + "/cases/ieee14.m");
  TransmissionInterface a;
  a.id = "a";
  a.lines = {{1, 1}, {2, 1}};
  a.sigma_minus = 180.0;
  a.sigma_plus = 260.0;
  TransmissionInterface b;
  b.id = "b";
  b.lines = {{7, 1}};
  b.sigma_minus = -80.0;
  b.sigma_plus = 0.0;
  std::vector<TransmissionInterface> ifaces{a, b};
  auto tasks = single_interface_tasks(ifaces);
  return std::make_shared<const Problem>(std::move(grid), std::move(ifaces), std::move(tasks));
}

}  // namespace

TEST_CASE("single-interface power-flow reward") {
  const auto f = band(90, 640);
  CHECK(reward_pf_single(365, f) == 0.0);
  CHECK(reward_pf_single(700, f) == -335.0);
  CHECK(reward_pf_single(50, f) == -315.0);
}

TEST_CASE("multi-interface reward takes the worst component") {
  const auto f1 = band(90, 640, "a");
  const auto f2 = band(0, 20, "b");
  const TransmissionInterface* both[] = {&f1, &f2};
  const double flows[] = {375.0, 345.0};  // -10 and -335
  CHECK(reward_pf_multi(flows, both) == -335.0);
  const double one[] = {700.0};
  CHECK(reward_pf_multi(std::span(one), std::span(both, 1)) == reward_pf_single(700.0, f1));
  const double centred[] = {365.0, 10.0};
  CHECK(reward_pf_multi(centred, both) == 0.0);
  CHECK_THROWS_AS(reward_pf_multi(std::span<const double>(), std::span(both, 0)), ContractError);
  CHECK_THROWS_AS(reward_pf_multi(std::span(one), std::span(both, 2)), ContractError);
}

TEST_CASE("power-flow reward is non-positive and zero only at the midpoint") {
  const auto f = band(-40, 260);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1000, 1000);
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng);
    CHECK(reward_pf_single(p, f) <= 0.0);
    CHECK((reward_pf_single(p, f) == 0.0) == (p == 110.0));
  }
  CHECK(reward_pf_single(110.0, f) == 0.0);
}

TEST_CASE("economic-dispatch reward") {
  GridCase grid = feeder(0, 50);
  for (auto& g : grid.generators) g.cost = {};
  CHECK(reward_ed(grid) == 0.0);

  grid = feeder(0, 100);
  grid.generators[0].cost = {};
  grid.generators[1].cost = {0.01, 10.0, 5.0};
  CHECK(reward_ed(grid) == doctest::Approx(-1105.0).epsilon(1e-15));

  grid.generators[1].cost = {0.0, 10.0, 0.0};
  const double single = reward_ed(grid);
  grid.generators[1].p_mw = 200.0;
  CHECK(reward_ed(grid) == 2.0 * single);
}

TEST_CASE("action mask boundaries") {
  auto problem = feeder_problem(feeder(150, 50), band(20, 60));
  OperationState s;
  s.setpoints_mw = Eigen::VectorXd::Zero(2);

  s.setpoints_mw(1) = 50.0;
  CHECK(valid_action_mask(*problem, s) == std::vector<bool>{true, true});

  s.setpoints_mw(1) = 100.0;  // at P_max
  CHECK(valid_action_mask(*problem, s) == std::vector<bool>{true, false});

  GridCase g = feeder(150, 100);
  g.generators[1].p_max_mw = 105.0;
  auto loose = feeder_problem(g, band(20, 60));
  s.setpoints_mw(1) = 100.0;  // 110 > 105
  CHECK(valid_action_mask(*loose, s) == std::vector<bool>{true, false});

  s.setpoints_mw(1) = 11.0;  // 9.9 < 10
  CHECK(valid_action_mask(*problem, s) == std::vector<bool>{false, true});

  CHECK(problem->action_count() == 2);
}

TEST_CASE("reset returns the solved insecure state") {
  GridCase grid = feeder(700, 10, 0.05, 1000);
  auto problem = feeder_problem(grid, band(90, 640));
  Environment env(problem);
  const OperationState& s = env.reset(unperturbed(), "phi1");
  REQUIRE(s.interface_flows_mw.size() == 1);
  CHECK(s.interface_flows_mw[0] == doctest::Approx(690.0).epsilon(1e-9));
  CHECK_FALSE(problem->interfaces()[0].contains(s.interface_flows_mw[0]));
  CHECK(env.steps() == 0);
  CHECK_FALSE(env.done());

  Environment other(problem);
  const OperationState& t = other.reset(unperturbed(), 0);
  CHECK(t.features == s.features);
  CHECK(t.setpoints_mw == s.setpoints_mw);
}

TEST_CASE("reset rejects secure tasks") {
  auto problem = feeder_problem(feeder(150, 50), band(0, 200));
  Environment env(problem);
  CHECK_THROWS_AS(env.reset(unperturbed(), "phi1"), ContractError);
  CHECK_THROWS_AS(env.reset(unperturbed({}), "phi1"), ContractError);
}

TEST_CASE("state features equal the solver arrays") {
  auto problem = ieee14_problem();
  const auto sol = problem->solver().solve(problem->grid());
  const OperationState s = make_state(sol, problem->grid(), *problem);
  CHECK(s.features.rows() == 14);
  CHECK(s.features.cols() == 4);
  CHECK(s.features.col(2) == sol.vm);
  CHECK(s.features.col(3) == sol.va);
  CHECK(s.features.col(0) == sol.p_mw);
  CHECK(s.features.col(1) == sol.q_mvar);
  const auto& a = problem->adjacency();
  CHECK(a == a.transpose());
  CHECK(a.diagonal().isZero());
}

TEST_CASE("ordinary step reward is the weighted composition") {
  // Band [20, 60] stays violated after raising the local generator 50 -> 55.
  auto problem = feeder_problem(feeder(150, 50), band(20, 60));
  EnvConfig cfg;
  cfg.weights.pf = 0.5;
  cfg.weights.ed = 0.001;
  Environment env(problem, cfg);
  env.reset(unperturbed(), "phi1");
  const StepResult r = env.step(1);

  // Lossless line: transfer = 150 - 55 = 95 MW, slack output 95 MW.
  const double r_pf = -std::abs(95.0 - 40.0);
  const double r_ed = -((0.01 * 95 * 95 + 10 * 95 + 5) + (0.02 * 55 * 55 + 20 * 55));
  CHECK_FALSE(r.terminal);
  CHECK(r.cause == Termination::none);
  CHECK(r.reward_pf == doctest::Approx(r_pf).epsilon(1e-8));
  CHECK(r.reward_ed == doctest::Approx(r_ed).epsilon(1e-8));
  CHECK(r.reward == doctest::Approx(0.5 * r_pf + 0.001 * r_ed).epsilon(1e-8));
  CHECK(r.reward == 0.5 * r.reward_pf + 0.001 * r.reward_ed);
  CHECK(env.state().setpoints_mw(1) == doctest::Approx(55.0).epsilon(1e-15));
}

TEST_CASE("terminal outcomes override the shaped reward") {
  EnvConfig cfg;
  cfg.weights.terminal = 0.25;

  SUBCASE("success") {
    auto problem = feeder_problem(feeder(150, 50), band(20, 97));
    Environment env(problem, cfg);
    env.reset(unperturbed(), "phi1");
    const StepResult r = env.step(1);
    CHECK(r.terminal);
    CHECK(r.cause == Termination::success);
    CHECK(r.reward == 25.0);
    CHECK(problem->interfaces()[0].contains(env.state().interface_flows_mw[0]));
    CHECK_THROWS_AS(env.step(0), ContractError);
  }
  SUBCASE("divergence") {
    // x = 0.5 p.u. caps the transfer at 200 MW; lowering 55 -> 49.5 asks for 200.5.
    auto problem = feeder_problem(feeder(250, 55, 0.5), band(20, 60));
    Environment env(problem, cfg);
    const OperationState before = env.reset(unperturbed(), "phi1");
    const StepResult r = env.step(0);
    CHECK(r.terminal);
    CHECK(r.cause == Termination::divergence);
    CHECK(r.reward == -25.0);
    CHECK(env.state().features == before.features);
  }
  SUBCASE("slack overload") {
    auto problem = feeder_problem(feeder(150, 50, 0.1, 104.0), band(20, 60));
    Environment env(problem, cfg);
    env.reset(unperturbed(), "phi1");
    const StepResult r = env.step(0);  // slack must now supply 105 MW
    CHECK(r.terminal);
    CHECK(r.cause == Termination::slack_overload);
    CHECK(r.reward == -25.0);
  }
  SUBCASE("horizon") {
    cfg.horizon = 3;
    auto problem = feeder_problem(feeder(150, 50), band(-20, 0));
    Environment env(problem, cfg);
    env.reset(unperturbed(), "phi1");
    CHECK_FALSE(env.step(1).terminal);
    CHECK_FALSE(env.step(0).terminal);
    const StepResult r = env.step(1);
    CHECK(r.terminal);
    CHECK(r.cause == Termination::horizon);
    CHECK(r.reward == r.reward_pf);
  }
}

TEST_CASE("masked and out-of-range actions are contract errors") {
  auto problem = feeder_problem(feeder(150, 100), band(20, 40));
  Environment env(problem);
  env.reset(unperturbed(), "phi1");
  CHECK_THROWS_AS(env.step(1), ContractError);
  CHECK_THROWS_AS(env.step(2), ContractError);
  CHECK_FALSE(env.done());
}

TEST_CASE("task catalogue validation") {
  std::vector<TransmissionInterface> ifaces{band(0, 1, "a"), band(0, 1, "b"), band(0, 1, "c")};
  CHECK_NOTHROW(Problem(feeder(0, 50), ifaces, {{"t", {0, 1}}}));
  CHECK_THROWS(Problem(feeder(0, 50), ifaces, {{"t", {0, 1, 2}}}));
  CHECK_THROWS(Problem(feeder(0, 50), ifaces, {{"t", {0, 0}}}));
  CHECK_THROWS(Problem(feeder(0, 50), ifaces, {{"t", {}}}));
  CHECK_THROWS(Problem(feeder(0, 50), ifaces, {{"t", {0}}, {"t", {1}}}));

  const json doc = json::parse(R"([{"task_id": "ab", "interface_ids": ["a", "b"]}])");
  const auto tasks = tasks_from_json(doc, ifaces);
  REQUIRE(tasks.size() == 1);
  CHECK(tasks[0].kind() == TaskKind::multi);
  CHECK(tasks[0].interfaces == std::vector<std::size_t>{0, 1});
  CHECK(tasks_to_json(tasks, ifaces) == doc);
  CHECK_THROWS(tasks_from_json(json::parse(R"([{"task_id": "x", "interface_ids": ["zz"]}])"), ifaces));
}

TEST_CASE("multiplier grid") {
  const auto m = default_multipliers();
  REQUIRE(m.size() == 20);
  for (int k = 1; k <= 20; ++k) CHECK(m[k - 1] == doctest::Approx(k / 10.0).epsilon(1e-15));
}

TEST_CASE("scenario generation is deterministic and tags insecure tasks") {
  auto problem = ieee14_problem();
  ScenarioConfig cfg;
  cfg.count = 40;
  const auto a = generate_scenarios(*problem, cfg, 7);
  const auto b = generate_scenarios(*problem, cfg, 7);
  REQUIRE(a.size() == 40);
  CHECK(a == b);
  cfg.workers = 3;
  CHECK(generate_scenarios(*problem, cfg, 7) == a);
  CHECK(generate_scenarios(*problem, {.count = 40}, 8) != a);

  const std::size_t loads = problem->grid().loads.size();
  for (const Scenario& s : a) {
    CHECK_FALSE(s.insecure_tasks.empty());
    std::size_t load_overrides = 0;
    for (const auto& o : s.overrides) load_overrides += o.element.starts_with("load:") ? 1 : 0;
    CHECK(load_overrides == 2 * static_cast<std::size_t>(std::lround(0.25 * loads)));

    const GridCase g = apply_scenario(problem->grid(), s);
    for (const auto& gen : g.generators) {
      CHECK(gen.p_mw >= gen.p_min_mw);
      CHECK(gen.p_mw <= gen.p_max_mw);
    }
    for (std::size_t l = 0; l < g.loads.size(); ++l) {
      const auto& base = problem->grid().loads[l];
      if (base.p_mw != 0.0 && base.q_mvar != 0.0) {
        CHECK(g.loads[l].q_mvar / g.loads[l].p_mw == doctest::Approx(base.q_mvar / base.p_mw).epsilon(1e-12));
      }
    }
    const auto sol = problem->solver().solve(g);
    REQUIRE(sol.converged);
    for (const Task& t : problem->tasks()) {
      const bool listed = std::find(s.insecure_tasks.begin(), s.insecure_tasks.end(), t.id) != s.insecure_tasks.end();
      CHECK(listed == is_insecure(sol, *problem, t));
    }
  }
}

TEST_CASE("scenario split and JSON round trip") {
  auto problem = ieee14_problem();
  const auto all = generate_scenarios(*problem, {.count = 30}, 11);
  const auto split = split_scenarios(all, 0.9, 5);
  CHECK(split.train.size() == 27);
  CHECK(split.test.size() == 3);
  const auto again = split_scenarios(all, 0.9, 5);
  CHECK(again.train == split.train);

  CHECK(scenarios_from_json(scenarios_to_json(all)) == all);
  const auto path = std::filesystem::temp_directory_path() / "mamgrid_scenarios_test.json";
  save_scenarios_file(all, path.string());
  CHECK(load_scenarios_file(path.string()) == all);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(apply_scenario(problem->grid(), {"x", "", {{"load:999", "p_mw", 1.0}}, {}}), powergrid::CaseError);
  CHECK_THROWS_AS(apply_scenario(problem->grid(), {"x", "", {{"bus:1", "p_mw", 1.0}}, {}}), powergrid::CaseError);
}

TEST_CASE("is_insecure on explicit flows") {
  auto problem = feeder_problem(feeder(0, 50), band(90, 640));
  const Task& t = problem->tasks()[0];
  const double high[] = {700.0};
  const double mid[] = {365.0};
  CHECK(is_insecure(high, *problem, t));
  CHECK_FALSE(is_insecure(mid, *problem, t));

  std::vector<TransmissionInterface> ifaces{band(90, 640, "a"), band(0, 1000, "b"), band(0, 1, "c")};
  Problem multi(feeder(0, 50), ifaces, {{"ab", {0, 1}}});
  const double flows[] = {700.0, 500.0, 0.5};
  CHECK(is_insecure(flows, multi, multi.tasks()[0]));
}

TEST_CASE("random rollouts respect generator limits and the horizon") {
  auto problem = ieee14_problem();
  const auto pool = generate_scenarios(*problem, {.count = 10}, 21);
  Environment env(problem);
  std::mt19937_64 rng(4);
  for (const Scenario& s : pool) {
    env.reset(s, s.insecure_tasks.front());
    std::size_t len = 0;
    while (!env.done()) {
      const auto m = env.mask();
      std::vector<std::size_t> legal;
      for (std::size_t a = 0; a < m.size(); ++a) {
        if (m[a]) legal.push_back(a);
      }
      REQUIRE_FALSE(legal.empty());
      const StepResult r = env.step(legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]);
      ++len;
      if (r.terminal && r.cause != Termination::horizon) {
        CHECK(std::abs(r.reward) == kTerminalReward);
      }
      for (std::size_t g : problem->controllable()) {
        const auto& gen = env.grid().generators[g];
        CHECK(gen.p_mw >= gen.p_min_mw);
        CHECK(gen.p_mw <= gen.p_max_mw);
      }
    }
    CHECK(len <= 50);
  }
}
