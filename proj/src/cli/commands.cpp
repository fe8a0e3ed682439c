#include "mamgrid/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <CLI11.hpp>

#include "mamgrid/env/problem.hpp"
#include "mamgrid/env/scenario.hpp"
#include "mamgrid/mam/checkpoint.hpp"
#include "mamgrid/powergrid/case.hpp"
#include "mamgrid/powergrid/power_flow.hpp"
#include "mamgrid/training/evaluate.hpp"
#include "mamgrid/training/trainer.hpp"

namespace mamgrid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
  const char* v = std::getenv("MAMGRID_LOG_LEVEL");
  if (!v) return LogLevel::info;
  const std::string s(v);
  if (s == "quiet" || s == "error" || s == "warn") return LogLevel::quiet;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string(what) + " path is required");
  if (!fs::exists(path)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const json& doc, const fs::path& path, int indent = 1) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << doc.dump(indent) << '\n';
}

std::shared_ptr<const env::Problem> problem_from(const std::string& case_path, const std::string& ifaces,
                                                 const std::string& tasks) {
  require_file(case_path, "case");
  require_file(ifaces, "interfaces");
  if (!tasks.empty()) require_file(tasks, "tasks");
  return env::load_problem(case_path, ifaces, tasks);
}

// A scenario path may name a file or a directory produced by gen-scenarios.
std::vector<env::Scenario> scenarios_from(const std::string& path, const char* default_file) {
  if (path.empty()) throw UsageError("scenarios path is required");
  fs::path p(path);
  if (fs::is_directory(p)) p /= default_file;
  if (!fs::exists(p)) throw UsageError("scenario file '" + p.string() + "' does not exist");
  return env::load_scenarios_file(p.string());
}

// ---------------------------------------------------------------- convert-case

int cmd_convert(const std::string& in, const std::string& out_path, std::ostream& out) {
  require_file(in, "case");
  const powergrid::GridCase grid = env::load_any_case(in);
  powergrid::save_case_file(grid, out_path);
  out << "wrote " << out_path << " (" << grid.buses.size() << " buses, " << grid.lines.size() << " lines, "
      << grid.generators.size() << " generators, " << grid.loads.size() << " loads)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- solve-pf

int cmd_solve(const std::string& case_path, bool as_json, std::ostream& out, std::ostream& err) {
  require_file(case_path, "case");
  const powergrid::GridCase grid = env::load_any_case(case_path);
  const auto t0 = std::chrono::steady_clock::now();
  const powergrid::PowerFlowSolution sol = powergrid::solve_power_flow(grid);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (as_json) {
    json buses = json::array();
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      buses.push_back({{"id", grid.buses[i].id},
                       {"type", std::string(powergrid::to_string(sol.bus_types.empty() ? grid.buses[i].type
                                                                                       : sol.bus_types[i]))},
                       {"vm", sol.vm(k)},
                       {"va_rad", sol.va(k)},
                       {"p_mw", sol.p_mw(k)},
                       {"q_mvar", sol.q_mvar(k)}});
    }
    json lines = json::array();
    for (std::size_t i = 0; i < grid.lines.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      lines.push_back({{"id", grid.lines[i].id}, {"p_from_mw", sol.line_p_from_mw(k)}, {"p_to_mw", sol.line_p_to_mw(k)}});
    }
    json gens = json::array();
    for (std::size_t i = 0; i < grid.generators.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      gens.push_back({{"id", grid.generators[i].id}, {"p_mw", sol.gen_p_mw(k)}, {"q_mvar", sol.gen_q_mvar(k)}});
    }
    out << json{{"case", grid.name},
                {"converged", sol.converged},
                {"iterations", sol.iterations},
                {"max_mismatch", sol.max_mismatch},
                {"buses", buses},
                {"lines", lines},
                {"generators", gens}}
               .dump(1)
        << '\n';
  } else if (sol.converged) {
    out << grid.name << ": converged in " << sol.iterations << " iterations (" << std::fixed << std::setprecision(2)
        << ms << " ms)\n";
    out << std::setw(6) << "bus" << std::setw(7) << "type" << std::setw(10) << "V (pu)" << std::setw(11) << "angle (deg)"
        << std::setw(11) << "P (MW)" << std::setw(11) << "Q (MVAr)" << '\n';
    for (std::size_t i = 0; i < grid.buses.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      out << std::setw(6) << grid.buses[i].id << std::setw(7) << powergrid::to_string(sol.bus_types[i])
          << std::setw(10) << std::setprecision(4) << sol.vm(k) << std::setw(11) << std::setprecision(3)
          << sol.va(k) * 180.0 / 3.14159265358979323846 << std::setw(11) << sol.p_mw(k) << std::setw(11)
          << sol.q_mvar(k) << '\n';
    }
  }
  if (!sol.converged) {
    err << "error: power flow did not converge (" << sol.iterations << " iterations, max mismatch "
        << sol.max_mismatch << " pu)\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gen-scenarios

struct ScenarioRun {
  std::string case_path, interfaces_path, tasks_path, output_dir;
  env::ScenarioConfig cfg;
  double train_fraction = 0.9;
  std::uint64_t seed = 0;

  json to_json() const {
    return {{"case_path", case_path},
            {"interfaces_path", interfaces_path},
            {"tasks_path", tasks_path},
            {"output_dir", output_dir},
            {"fraction", cfg.fraction},
            {"multipliers", cfg.multipliers},
            {"count", cfg.count},
            {"max_attempts", cfg.max_attempts},
            {"reject_slack_overload", cfg.reject_slack_overload},
            {"workers", cfg.workers},
            {"train_fraction", train_fraction},
            {"seed", seed}};
  }

  void merge(const json& doc) {
    try {
      case_path = doc.value("case_path", case_path);
      interfaces_path = doc.value("interfaces_path", interfaces_path);
      tasks_path = doc.value("tasks_path", tasks_path);
      output_dir = doc.value("output_dir", output_dir);
      cfg.fraction = doc.value("fraction", cfg.fraction);
      cfg.multipliers = doc.value("multipliers", cfg.multipliers);
      cfg.count = doc.value("count", cfg.count);
      cfg.max_attempts = doc.value("max_attempts", cfg.max_attempts);
      cfg.reject_slack_overload = doc.value("reject_slack_overload", cfg.reject_slack_overload);
      cfg.workers = doc.value("workers", cfg.workers);
      train_fraction = doc.value("train_fraction", train_fraction);
      seed = doc.value("seed", seed);
    } catch (const json::exception& e) {
      throw UsageError(std::string("scenario config: ") + e.what());
    }
  }
};

int cmd_gen(ScenarioRun run, std::ostream& out) {
  if (run.output_dir.empty()) throw UsageError("--out is required");
  if (run.cfg.fraction <= 0.0 || run.cfg.fraction > 1.0) throw UsageError("--fraction must lie in (0, 1]");
  if (run.train_fraction <= 0.0 || run.train_fraction >= 1.0) throw UsageError("--train-fraction must lie in (0, 1)");
  if (run.cfg.workers == 0) throw UsageError("--workers must be positive");
  auto problem = problem_from(run.case_path, run.interfaces_path, run.tasks_path);
  fs::create_directories(run.output_dir);
  write_json(run.to_json(), fs::path(run.output_dir) / "config.json");

  auto all = env::generate_scenarios(*problem, run.cfg, run.seed);
  if (all.size() < run.cfg.count) {
    throw std::runtime_error("only " + std::to_string(all.size()) + " insecure scenarios found within the attempt budget");
  }
  for (auto& s : all) s.base_case = problem->grid().name;
  const auto split = env::split_scenarios(all, run.train_fraction, run.seed);
  env::save_scenarios_file(all, (fs::path(run.output_dir) / "all.json").string());
  env::save_scenarios_file(split.train, (fs::path(run.output_dir) / "train.json").string());
  env::save_scenarios_file(split.test, (fs::path(run.output_dir) / "test.json").string());

  out << "generated " << all.size() << " scenarios (" << split.train.size() << " train, " << split.test.size()
      << " test) in " << run.output_dir << '\n';
  for (const auto& t : problem->tasks()) {
    const auto n = std::count_if(all.begin(), all.end(), [&](const env::Scenario& s) {
      return std::find(s.insecure_tasks.begin(), s.insecure_tasks.end(), t.id) != s.insecure_tasks.end();
    });
    out << "  " << t.id << ": " << n << " insecure\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& run, std::ostream& out, std::ostream& err) {
  run.validate_paths();
  if (run.output_dir.empty()) throw UsageError("--out is required");
  auto problem = env::load_problem(run.case_path, run.interfaces_path, run.tasks_path);
  const auto train = scenarios_from(run.scenario_dir, "train.json");
  const auto test = scenarios_from(run.scenario_dir, "test.json");

  const fs::path dir(run.output_dir);
  fs::create_directories(dir / "checkpoints");
  write_json(run.to_json(), dir / "config.json");
  std::ofstream metrics(dir / "metrics.jsonl");
  if (!metrics) throw std::runtime_error("cannot write metrics log in '" + run.output_dir + "'");

  const LogLevel level = log_level();
  const json run_meta{{"run_config", run.to_json()}};
  training::TrainHooks hooks;
  hooks.on_metrics = [&](const json& rec) {
    metrics << rec.dump() << '\n';
    metrics.flush();
    if (level == LogLevel::debug) err << rec.dump() << '\n';
  };
  hooks.on_eval = [&](std::size_t step, const training::EvalReport& report, const mam::QNetwork& net,
                      const tensornet::ParameterSet& params) {
    json extra = run_meta;
    extra["step"] = step;
    extra["eval_success_rate"] = report.aggregate.success_rate;
    char name[64];
    std::snprintf(name, sizeof name, "step_%08zu.json", step);
    mam::save_checkpoint(mam::make_checkpoint(net, params, extra), (dir / "checkpoints" / name).string());
    if (level != LogLevel::quiet) {
      err << "[train] step " << step << ": test success " << std::fixed << std::setprecision(2)
          << report.aggregate.success_rate << "%, mean cost " << report.aggregate.mean_cost << '\n';
    }
  };

  const auto result = training::run_training(problem, run.model, train, test, run.train, hooks);

  json extra = run_meta;
  extra["step"] = result.steps;
  mam::save_checkpoint(mam::make_checkpoint(result.network, result.params, extra), (dir / "final.json").string());
  extra["step"] = result.best_step;
  mam::save_checkpoint(mam::make_checkpoint(result.network, result.best_params, extra), (dir / "best.json").string());
  json summary{{"steps", result.steps},
               {"episodes", result.episodes},
               {"updates", result.updates},
               {"divergent_episodes", result.divergent_episodes},
               {"stuck_episodes", result.stuck_episodes},
               {"best_step", result.best_step},
               {"best_success_rate", result.best_eval ? result.best_eval->aggregate.success_rate : 0.0}};
  write_json(summary, dir / "summary.json");
  out << "trained " << result.steps << " steps (" << result.episodes << " episodes); best test success "
      << summary["best_success_rate"].get<double>() << "% at step " << result.best_step << "; outputs in "
      << run.output_dir << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

void print_report(const training::EvalReport& r, std::ostream& out) {
  out << std::left << std::setw(12) << "task" << std::right << std::setw(10) << "episodes" << std::setw(11)
      << "success %" << std::setw(14) << "mean cost $" << std::setw(12) << "ms/episode" << '\n';
  auto row = [&](const training::EvalSummary& s) {
    out << std::left << std::setw(12) << s.task_id << std::right << std::setw(10) << s.episodes << std::fixed
        << std::setprecision(2) << std::setw(11) << s.success_rate << std::setw(14) << s.mean_cost << std::setw(12)
        << 1e3 * s.mean_seconds << '\n';
  };
  for (const auto& s : r.per_task) row(s);
  row(r.aggregate);
  out << r.scenario_count << " scenarios, checkpoint " << r.checkpoint_hash << '\n';
}

struct ModelInputs {
  std::string checkpoint, case_path, interfaces_path, tasks_path, scenarios;
};

// Case/interface/task paths default to the ones recorded in the checkpoint.
void fill_from_checkpoint(ModelInputs& in, const mam::Checkpoint& ckpt) {
  if (!ckpt.extra.contains("run_config")) return;
  const json& rc = ckpt.extra.at("run_config");
  if (in.case_path.empty()) in.case_path = rc.value("case_path", "");
  if (in.interfaces_path.empty()) in.interfaces_path = rc.value("interfaces_path", "");
  if (in.tasks_path.empty()) in.tasks_path = rc.value("tasks_path", "");
  if (in.scenarios.empty()) in.scenarios = rc.value("scenario_dir", "");
}

int cmd_eval(ModelInputs in, bool as_json, const std::string& report_path, std::ostream& out) {
  require_file(in.checkpoint, "checkpoint");
  const mam::Checkpoint ckpt = mam::load_checkpoint(in.checkpoint);
  fill_from_checkpoint(in, ckpt);
  auto problem = problem_from(in.case_path, in.interfaces_path, in.tasks_path);
  const auto scenarios = scenarios_from(in.scenarios, "test.json");
  auto [net, params] = mam::restore(*problem, ckpt);
  env::EnvConfig env_cfg;
  if (ckpt.extra.contains("run_config")) {
    env_cfg = training::TrainConfig::from_json(ckpt.extra.at("run_config").at("train")).env;
  }
  const auto report = training::evaluate(net, params, problem, scenarios, env_cfg);
  if (!report_path.empty()) write_json(report.to_json(), report_path);
  if (as_json) {
    out << report.to_json().dump(1) << '\n';
  } else {
    print_report(report, out);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- attribute

int cmd_attribute(ModelInputs in, const std::string& scenario_id, const std::string& task_id, std::size_t top_k,
                  const std::string& out_path, std::ostream& out) {
  require_file(in.checkpoint, "checkpoint");
  const mam::Checkpoint ckpt = mam::load_checkpoint(in.checkpoint);
  if (ckpt.model.variant == mam::Variant::concat_dqn) {
    throw UsageError("the concat-dqn baseline has no attribution map");
  }
  fill_from_checkpoint(in, ckpt);
  auto problem = problem_from(in.case_path, in.interfaces_path, in.tasks_path);
  const auto scenarios = scenarios_from(in.scenarios, "all.json");
  auto it = std::find_if(scenarios.begin(), scenarios.end(),
                         [&](const env::Scenario& s) { return s.scenario_id == scenario_id; });
  if (it == scenarios.end()) throw UsageError("scenario '" + scenario_id + "' not found");
  auto [net, params] = mam::restore(*problem, ckpt);
  const std::size_t task = problem->task_index(task_id);

  env::Environment env(problem);
  const env::OperationState& state = env.reset(*it, task);
  const tensornet::Matrix* states[] = {&state.features};
  const std::size_t tasks[] = {task};
  const tensornet::Matrix rho = net.attribution(mam::make_batch(states, tasks), params);

  json map = json::object();
  std::vector<std::size_t> order(static_cast<std::size_t>(rho.cols()));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t n = 0; n < order.size(); ++n) {
    map[std::to_string(problem->grid().buses[n].id)] = rho(0, static_cast<Eigen::Index>(n));
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rho(0, static_cast<Eigen::Index>(a)) > rho(0, static_cast<Eigen::Index>(b));
  });
  json top = json::array();
  for (std::size_t k = 0; k < std::min(top_k, order.size()); ++k) {
    top.push_back({{"bus_id", problem->grid().buses[order[k]].id}, {"rho", rho(0, static_cast<Eigen::Index>(order[k]))}});
  }
  const json doc{{"scenario_id", scenario_id},
                 {"task_id", task_id},
                 {"variant", std::string(mam::to_string(ckpt.model.variant))},
                 {"attribution", map},
                 {"top_k", top}};
  if (!out_path.empty()) write_json(doc, out_path);
  out << doc.dump(1) << '\n';
  return kExitOk;
}

}  // namespace

json RunConfig::to_json() const {
  return {{"case_path", case_path},
          {"interfaces_path", interfaces_path},
          {"tasks_path", tasks_path},
          {"scenario_dir", scenario_dir},
          {"output_dir", output_dir},
          {"model", model.to_json()},
          {"train", train.to_json()}};
}

RunConfig RunConfig::from_json(const json& doc) {
  RunConfig r;
  try {
    r.case_path = doc.value("case_path", "");
    r.interfaces_path = doc.value("interfaces_path", "");
    r.tasks_path = doc.value("tasks_path", "");
    r.scenario_dir = doc.value("scenario_dir", "");
    r.output_dir = doc.value("output_dir", "");
    if (doc.contains("model")) r.model = mam::ModelConfig::from_json(doc.at("model"));
    if (doc.contains("train")) r.train = training::TrainConfig::from_json(doc.at("train"));
  } catch (const json::exception& e) {
    throw UsageError(std::string("run config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return r;
}

void RunConfig::validate_paths() const {
  require_file(case_path, "case");
  require_file(interfaces_path, "interfaces");
  if (!tasks_path.empty()) require_file(tasks_path, "tasks");
  require_file(scenario_dir, "scenarios");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transmission-interface power-flow adjustment with multi-task graph Q-learning", "mamgrid"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string in_path, out_path;
  auto* convert = app.add_subcommand("convert-case", "Convert a MATPOWER or JSON case to the JSON case format");
  convert->add_option("input", in_path, "MATPOWER (.m) or JSON case")->required();
  convert->add_option("output", out_path, "JSON case to write")->required();

  std::string case_path;
  bool as_json = false;
  auto* solve = app.add_subcommand("solve-pf", "Solve the AC power flow of a case");
  solve->add_option("case", case_path, "case file (.m or .json)")->required();
  solve->add_flag("--json", as_json, "Machine-readable output");

  ScenarioRun gen;
  std::string gen_config;
  auto* gen_cmd = app.add_subcommand("gen-scenarios", "Generate insecure operating scenarios");
  gen_cmd->add_option("--config", gen_config, "scenario config JSON (flags override it)");
  gen_cmd->add_option("--case", gen.case_path, "case file");
  gen_cmd->add_option("--interfaces", gen.interfaces_path, "interface definitions");
  gen_cmd->add_option("--tasks", gen.tasks_path, "task definitions (default: one task per interface)");
  gen_cmd->add_option("--count", gen.cfg.count, "insecure scenarios to generate");
  gen_cmd->add_option("--fraction", gen.cfg.fraction, "share of loads and units perturbed");
  gen_cmd->add_option("--max-attempts", gen.cfg.max_attempts, "attempt budget (0: 50 x count)");
  gen_cmd->add_option("--workers", gen.cfg.workers, "power-flow worker threads");
  gen_cmd->add_option("--train-fraction", gen.train_fraction, "train share of the split");
  gen_cmd->add_option("--seed", gen.seed, "random seed");
  gen_cmd->add_option("--out", gen.output_dir, "output directory");

  std::string train_config, variant;
  RunConfig run_flags;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  auto* train = app.add_subcommand("train", "Train a Q network");
  train->add_option("--config", train_config, "run config JSON (flags override it)");
  train->add_option("--case", run_flags.case_path, "case file");
  train->add_option("--interfaces", run_flags.interfaces_path, "interface definitions");
  train->add_option("--tasks", run_flags.tasks_path, "task definitions");
  train->add_option("--scenarios", run_flags.scenario_dir, "scenario directory with train.json and test.json");
  train->add_option("--out", run_flags.output_dir, "output directory");
  auto* variant_opt = train->add_option("--variant", variant, "mam, mam-o, mam-m, mam-w or concat-dqn");
  auto* seed_opt = train->add_option("--seed", seed, "random seed");
  auto* steps_opt = train->add_option("--steps", steps, "environment step budget");

  ModelInputs inputs;
  std::string report_path;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint on test scenarios");
  eval->add_option("--checkpoint", inputs.checkpoint, "checkpoint file")->required();
  eval->add_option("--scenarios", inputs.scenarios, "scenario file or directory (test.json)");
  eval->add_option("--case", inputs.case_path, "case file (default: from the checkpoint)");
  eval->add_option("--interfaces", inputs.interfaces_path, "interface definitions (default: from the checkpoint)");
  eval->add_option("--tasks", inputs.tasks_path, "task definitions (default: from the checkpoint)");
  eval->add_option("--report", report_path, "also write the JSON report here");
  eval->add_flag("--json", as_json, "Machine-readable output");

  std::string scenario_id, task_id;
  std::size_t top_k = 5;
  auto* attribute = app.add_subcommand("attribute", "Export the attribution map of a scenario and task");
  attribute->add_option("--checkpoint", inputs.checkpoint, "checkpoint file")->required();
  attribute->add_option("--scenarios", inputs.scenarios, "scenario file or directory (all.json)");
  attribute->add_option("--scenario", scenario_id, "scenario id")->required();
  attribute->add_option("--task", task_id, "task id")->required();
  attribute->add_option("--case", inputs.case_path, "case file (default: from the checkpoint)");
  attribute->add_option("--interfaces", inputs.interfaces_path, "interface definitions (default: from the checkpoint)");
  attribute->add_option("--tasks", inputs.tasks_path, "task definitions (default: from the checkpoint)");
  attribute->add_option("--top-k", top_k, "number of top nodes to list");
  attribute->add_option("--out", out_path, "also write the JSON here");
  attribute->add_flag("--json", as_json, "accepted for symmetry; output is always JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*convert) return cmd_convert(in_path, out_path, out);
    if (*solve) return cmd_solve(case_path, as_json, out, err);
    if (*gen_cmd) {
      ScenarioRun run;
      if (!gen_config.empty()) {
        require_file(gen_config, "config");
        run.merge(read_json(gen_config));
      }
      // flags given on the command line override the file
      if (gen_cmd->count("--case")) run.case_path = gen.case_path;
      if (gen_cmd->count("--interfaces")) run.interfaces_path = gen.interfaces_path;
      if (gen_cmd->count("--tasks")) run.tasks_path = gen.tasks_path;
      if (gen_cmd->count("--count")) run.cfg.count = gen.cfg.count;
      if (gen_cmd->count("--fraction")) run.cfg.fraction = gen.cfg.fraction;
      if (gen_cmd->count("--max-attempts")) run.cfg.max_attempts = gen.cfg.max_attempts;
      if (gen_cmd->count("--workers")) run.cfg.workers = gen.cfg.workers;
      if (gen_cmd->count("--train-fraction")) run.train_fraction = gen.train_fraction;
      if (gen_cmd->count("--seed")) run.seed = gen.seed;
      if (gen_cmd->count("--out")) run.output_dir = gen.output_dir;
      return cmd_gen(run, out);
    }
    if (*train) {
      RunConfig run;
      if (!train_config.empty()) {
        require_file(train_config, "config");
        run = RunConfig::from_json(read_json(train_config));
      }
      if (train->count("--case")) run.case_path = run_flags.case_path;
      if (train->count("--interfaces")) run.interfaces_path = run_flags.interfaces_path;
      if (train->count("--tasks")) run.tasks_path = run_flags.tasks_path;
      if (train->count("--scenarios")) run.scenario_dir = run_flags.scenario_dir;
      if (train->count("--out")) run.output_dir = run_flags.output_dir;
      try {
        if (variant_opt->count()) run.model.variant = mam::variant_from_string(variant);
        if (seed_opt->count()) run.train.seed = seed;
        if (steps_opt->count()) run.train.total_steps = steps;
        run.train.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      return cmd_train(run, out, err);
    }
    if (*eval) return cmd_eval(inputs, as_json, report_path, out);
    if (*attribute) return cmd_attribute(inputs, scenario_id, task_id, top_k, out_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\nrun 'mamgrid --help' for usage\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace mamgrid::cli
