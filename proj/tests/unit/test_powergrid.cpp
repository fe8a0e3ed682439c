#include <doctest.h>

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mamgrid/powergrid/admittance.hpp"
#include "mamgrid/powergrid/case.hpp"
#include "mamgrid/powergrid/interface.hpp"
#include "mamgrid/powergrid/matpower.hpp"
#include "mamgrid/powergrid/power_flow.hpp"

using namespace mamgrid::powergrid;
using nlohmann::json;

namespace {

json two_bus_json(double load_mw, double x = 0.1, double r = 0.0) {
  return json{{"base_mva", 100.0},
              {"buses", {{{"id", 1}, {"type", "slack"}}, {{"id", 2}, {"type", "pq"}}}},
              {"lines", {{{"id", 1}, {"from", 1}, {"to", 2}, {"r", r}, {"x", x}}}},
              {"generators",
               {{{"id", 1}, {"bus", 1}, {"p_mw", 0.0}, {"p_min_mw", 0.0}, {"p_max_mw", 500.0}, {"v_setpoint", 1.0}}}},
              {"loads", {{{"id", 1}, {"bus", 2}, {"p_mw", load_mw}, {"q_mvar", 0.0}}}}};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return json::parse(in);
}

GridCase ieee(const char* name) { return load_matpower_file(std::string(MAMGRID_DATA_DIR) + "/cases/" + name + ".m"); }

std::string error_of(const json& doc) {
  try {
    (void)case_from_json(doc);
  } catch (const CaseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parse_case accepts the smallest valid case") {
  const GridCase grid = parse_case(two_bus_json(0.0).dump());
  CHECK(grid.buses.size() == 2);
  CHECK(grid.lines.size() == 1);
  CHECK(grid.slack_bus_index() == 0);
}

TEST_CASE("parse_case rejects invariant violations with the offending field") {
  json doc = two_bus_json(0.0);
  doc["buses"][1]["type"] = "slack";
  doc["generators"].push_back({{"id", 2}, {"bus", 2}, {"p_mw", 0.0}, {"p_min_mw", 0.0}, {"p_max_mw", 1.0}});
  CHECK(error_of(doc).find("multiple slack buses") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["buses"][0]["type"] = "pq";
  CHECK(error_of(doc).find("missing slack") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["base_mva"] = 0.0;
  CHECK(error_of(doc).find("base_mva") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["buses"][1]["id"] = 1;
  CHECK(error_of(doc).find("duplicate bus id") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["lines"][0]["to"] = 7;
  CHECK(error_of(doc).find("lines[0].to") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["generators"][0]["p_mw"] = 600.0;
  CHECK(error_of(doc).find("generators[0].p_mw") != std::string::npos);

  doc = two_bus_json(0.0);
  doc["generators"][0]["controllable"] = true;
  CHECK(error_of(doc).find("controllable") != std::string::npos);

  doc = two_bus_json(0.0);
  doc.erase("loads");
  CHECK(error_of(doc).find("loads") != std::string::npos);

  CHECK_THROWS_AS(parse_case("{not json"), CaseError);
}

TEST_CASE("case JSON round-trips") {
  const GridCase grid = ieee("ieee14");
  const GridCase again = case_from_json(case_to_json(grid));
  CHECK(case_to_json(again) == case_to_json(grid));
  CHECK(topology_hash(again) == topology_hash(grid));
}

TEST_CASE("MATPOWER conversion of the standard cases") {
  const GridCase c14 = ieee("ieee14");
  CHECK(c14.buses.size() == 14);
  CHECK(c14.generators.size() == 5);
  CHECK(c14.lines.size() == 20);
  CHECK(c14.loads.size() == 11);
  CHECK(c14.generators[0].cost.alpha == doctest::Approx(0.0430292599));
  CHECK(c14.generators[0].cost.beta == doctest::Approx(20.0));

  const GridCase c118 = ieee("ieee118");
  CHECK(c118.buses.size() == 118);
  CHECK(c118.generators.size() == 54);
  CHECK(c118.lines.size() == 186);
  CHECK(c118.loads.size() == 99);
  CHECK(c118.buses[c118.slack_bus_index()].id == 69);
  CHECK_FALSE(c118.generators[c118.slack_generator_index()].controllable);
}

TEST_CASE("MATPOWER parser errors") {
  CHECK_THROWS_AS(parse_matpower("mpc.baseMVA = 100;"), CaseError);
  CHECK_THROWS_AS(parse_matpower("mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1 0 0 1 1.1 0.9; 2 1 0 0];"),
                  CaseError);
}

TEST_CASE("admittance of a single lossless line") {
  const GridCase grid = parse_case(two_bus_json(0.0, 0.1).dump());
  const AdmittanceMatrix y = build_admittance(grid);
  CHECK(y.b(0, 0) == doctest::Approx(-10.0));
  CHECK(y.b(0, 1) == doctest::Approx(10.0));
  CHECK(y.b(1, 0) == doctest::Approx(10.0));
  CHECK(y.b(1, 1) == doctest::Approx(-10.0));
  CHECK(y.g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("admittance of an edgeless network is zero") {
  json doc = two_bus_json(0.0);
  doc["lines"] = json::array();
  const AdmittanceMatrix y = build_admittance(case_from_json(doc));
  CHECK(y.g.isZero(0.0));
  CHECK(y.b.isZero(0.0));
}

TEST_CASE("zero series impedance is rejected") {
  const GridCase grid = parse_case(two_bus_json(0.0, 0.0, 0.0).dump());
  CHECK_THROWS_AS(build_admittance(grid), CaseError);
}

TEST_CASE("IEEE 14-bus admittance matches the reference fixture") {
  const json fix = read_json(std::string(MAMGRID_FIXTURE_DIR) + "/ieee14_ybus.json");
  const AdmittanceMatrix y = build_admittance(ieee("ieee14"));
  for (int i = 0; i < 14; ++i) {
    for (int j = 0; j < 14; ++j) {
      CHECK(y.g(i, j) == doctest::Approx(fix["g"][i][j].get<double>()).epsilon(1e-12));
      CHECK(y.b(i, j) == doctest::Approx(fix["b"][i][j].get<double>()).epsilon(1e-12));
    }
  }
}

TEST_CASE("admittance is symmetric on the shipped cases") {
  for (const char* name : {"ieee14", "ieee118"}) {
    const AdmittanceMatrix y = build_admittance(ieee(name));
    CHECK((y.g - y.g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((y.b - y.b.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero-injection two-bus case stays flat") {
  const PowerFlowSolution sol = solve_power_flow(parse_case(two_bus_json(0.0).dump()));
  REQUIRE(sol.converged);
  CHECK(sol.vm(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(sol.va(1)) < 1e-12);
}

TEST_CASE("two-bus 100 MW transfer matches the closed-form solution") {
  // Lossless line, unity power factor load: V2 sin(th) = -P x, V2 = cos(th),
  // so sin(2 th) = -2 P x with P = 1 p.u., x = 0.1.
  const double theta = -0.5 * std::asin(0.2);
  const PowerFlowSolution sol = solve_power_flow(parse_case(two_bus_json(100.0).dump()));
  REQUIRE(sol.converged);
  CHECK(std::abs(sol.va(1) - theta) < 1e-8);
  CHECK(std::abs(sol.vm(1) - std::cos(theta)) < 1e-8);
  CHECK(std::abs(sol.va(1) - (-0.10067896)) < 1e-7);
  CHECK(std::abs(sol.gen_p_mw(0) - 100.0) < 1e-5);
}

TEST_CASE("infeasible transfer reports divergence instead of throwing") {
  // A lossless 0.1 p.u. line cannot carry more than 5 p.u.
  const PowerFlowSolution sol = solve_power_flow(parse_case(two_bus_json(1000.0).dump()));
  CHECK_FALSE(sol.converged);
  CHECK(sol.max_mismatch > 1e-8);
}

TEST_CASE("warm start must match the bus count") {
  const GridCase grid = parse_case(two_bus_json(10.0).dump());
  VoltageProfile bad{Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)};
  CHECK_THROWS_AS(solve_power_flow(grid, bad), CaseError);
}

TEST_CASE("standard cases match the reference solver") {
  for (const char* name : {"ieee14", "ieee118"}) {
    CAPTURE(name);
    const GridCase grid = ieee(name);
    const json fix = read_json(std::string(MAMGRID_FIXTURE_DIR) + "/" + name + "_pf.json");
    const PowerFlowSolution sol = solve_power_flow(grid);
    REQUIRE(sol.converged);
    CHECK(sol.iterations <= 10);
    const auto slack = static_cast<Eigen::Index>(grid.slack_bus_index());
    const double slack_ref = fix["va_rad"][slack].get<double>();
    for (Eigen::Index i = 0; i < sol.vm.size(); ++i) {
      CHECK(std::abs(sol.vm(i) - fix["vm"][i].get<double>()) < 1e-4);
      CHECK(std::abs(sol.va(i) - (fix["va_rad"][i].get<double>() - slack_ref)) < 1e-4);
    }
    for (Eigen::Index k = 0; k < sol.line_p_from_mw.size(); ++k) {
      CHECK(std::abs(sol.line_p_from_mw(k) - fix["line_p_from_mw"][k].get<double>()) < 1e-3);
    }
    for (Eigen::Index g = 0; g < sol.gen_p_mw.size(); ++g) {
      CHECK(std::abs(sol.gen_p_mw(g) - fix["gen_p_mw"][g].get<double>()) < 1e-3);
    }
  }
}

TEST_CASE("converged solutions certify against independently evaluated residuals") {
  for (const char* name : {"ieee14", "ieee118"}) {
    const GridCase grid = ieee(name);
    const PowerFlowSolution sol = solve_power_flow(grid);
    REQUIRE(sol.converged);
    const Residuals r = power_flow_residuals(grid, sol);
    const auto slack = static_cast<Eigen::Index>(grid.slack_bus_index());
    for (Eigen::Index i = 0; i < r.dp.size(); ++i) {
      if (i == slack) continue;
      CHECK(std::abs(r.dp(i)) <= 1e-8);
      CHECK(std::abs(r.dq(i)) <= 1e-8);
    }
  }
}

TEST_CASE("generation equals load plus losses") {
  for (const char* name : {"ieee14", "ieee118"}) {
    const GridCase grid = ieee(name);
    const PowerFlowSolution sol = solve_power_flow(grid);
    REQUIRE(sol.converged);
    double load = 0.0;
    for (const Load& l : grid.loads) load += l.p_mw;
    double shunt = 0.0;
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
      shunt += grid.buses[i].gs_mw * sol.vm(static_cast<Eigen::Index>(i)) * sol.vm(static_cast<Eigen::Index>(i));
    }
    const double losses = (sol.line_p_from_mw + sol.line_p_to_mw).sum();
    const double generation = sol.gen_p_mw.sum();
    CHECK(std::abs(generation - load - losses - shunt) / grid.base_mva < 1e-6);
  }
}

TEST_CASE("warm and flat starts agree") {
  for (const char* name : {"ieee14", "ieee118"}) {
    const GridCase grid = ieee(name);
    PowerFlowSolver solver(grid);
    const PowerFlowSolution flat = solver.solve(grid);
    REQUIRE(flat.converged);
    GridCase shifted = grid;
    for (Generator& g : shifted.generators) {
      if (g.controllable) g.p_mw = std::min(g.p_max_mw, g.p_mw * 1.1);
    }
    const PowerFlowSolution cold = solver.solve(shifted);
    const VoltageProfile seed = flat.voltages();
    const PowerFlowSolution warm = solver.solve(shifted, &seed);
    REQUIRE(cold.converged);
    REQUIRE(warm.converged);
    CHECK((cold.vm - warm.vm).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((cold.va - warm.va).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(warm.iterations <= cold.iterations);
  }
}

TEST_CASE("PV buses hold their set-point unless a reactive limit binds") {
  const GridCase grid = ieee("ieee118");
  const PowerFlowSolution sol = solve_power_flow(grid);
  REQUIRE(sol.converged);
  int switched = 0;
  for (std::size_t i = 0; i < grid.buses.size(); ++i) {
    if (grid.buses[i].type != BusType::pv) continue;
    double vset = 0.0;
    double qmin = 0.0;
    double qmax = 0.0;
    double qg = 0.0;
    for (std::size_t g = 0; g < grid.generators.size(); ++g) {
      if (grid.generators[g].bus != grid.buses[i].id) continue;
      vset = grid.generators[g].v_setpoint;
      qmin += grid.generators[g].q_min_mvar;
      qmax += grid.generators[g].q_max_mvar;
      qg += sol.gen_q_mvar(static_cast<Eigen::Index>(g));
    }
    if (sol.bus_types[i] == BusType::pv) {
      CHECK(sol.vm(static_cast<Eigen::Index>(i)) == doctest::Approx(vset));
      CHECK(qg <= qmax + 1e-6);
      CHECK(qg >= qmin - 1e-6);
    } else {
      ++switched;
      CHECK((std::abs(qg - qmin) < 1e-9 || std::abs(qg - qmax) < 1e-9));
    }
  }
  CHECK(switched > 0);
}

TEST_CASE("118-bus solve is fast") {
  const GridCase grid = ieee("ieee118");
  PowerFlowSolver solver(grid);
  const auto start = std::chrono::steady_clock::now();
  constexpr int repeats = 20;
  for (int k = 0; k < repeats; ++k) REQUIRE(solver.solve(grid).converged);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() / repeats;
  MESSAGE("118-bus solve: " << ms << " ms");
  CHECK(ms < 50.0);
}

TEST_CASE("interface flow sums signed sending-end flows") {
  const GridCase grid = ieee("ieee14");
  PowerFlowSolution sol = solve_power_flow(grid);
  sol.line_p_from_mw.setZero();
  sol.line_p_from_mw(0) = 250.0;
  sol.line_p_from_mw(1) = 300.0;
  sol.line_p_from_mw(2) = 200.0;

  TransmissionInterface single{"a", {{1, 1}}, 90.0, 640.0};
  CHECK(interface_flow(sol, single, grid) == 250.0);
  TransmissionInterface pair{"b", {{2, 1}, {3, 1}}, 90.0, 640.0};
  CHECK(interface_flow(sol, pair, grid) == 500.0);
  TransmissionInterface reversed{"c", {{2, -1}, {3, 1}}, 90.0, 640.0};
  CHECK(interface_flow(sol, reversed, grid) == -100.0);
  TransmissionInterface unknown{"d", {{999, 1}}, 90.0, 640.0};
  CHECK_THROWS_AS(interface_flow(sol, unknown, grid), CaseError);
}

TEST_CASE("interface validation") {
  const GridCase grid = ieee("ieee14");
  CHECK_NOTHROW(validate(TransmissionInterface{"ok", {{1, 1}}, 0.0, 1.0}, grid));
  CHECK_THROWS_AS(validate(TransmissionInterface{"empty", {}, 0.0, 1.0}, grid), CaseError);
  CHECK_THROWS_AS(validate(TransmissionInterface{"band", {{1, 1}}, 5.0, 5.0}, grid), CaseError);
  CHECK_THROWS_AS(validate(TransmissionInterface{"line", {{77, 1}}, 0.0, 1.0}, grid), CaseError);
  CHECK_THROWS_AS(validate(TransmissionInterface{"sign", {{1, 2}}, 0.0, 1.0}, grid), CaseError);

  const auto ifaces = interfaces_from_json(interfaces_to_json({TransmissionInterface{"x", {{1, -1}}, -3.0, 4.5}}));
  REQUIRE(ifaces.size() == 1);
  CHECK(ifaces[0].lines[0].sign == -1);
  CHECK(ifaces[0].sigma_plus == 4.5);
}
