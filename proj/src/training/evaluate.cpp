#include "mamgrid/training/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mamgrid/env/rewards.hpp"
#include "mamgrid/mam/checkpoint.hpp"

namespace mamgrid::training {

using nlohmann::json;

namespace {

json summary_to_json(const EvalSummary& s) {
  return {{"task_id", s.task_id},     {"episodes", s.episodes},   {"successes", s.successes},
          {"success_rate", s.success_rate}, {"mean_cost", s.mean_cost}, {"mean_seconds", s.mean_seconds}};
}

EvalSummary summary_from_json(const json& j) {
  EvalSummary s;
  s.task_id = j.at("task_id").get<std::string>();
  s.episodes = j.at("episodes").get<std::size_t>();
  s.successes = j.at("successes").get<std::size_t>();
  s.success_rate = j.at("success_rate").get<double>();
  s.mean_cost = j.at("mean_cost").get<double>();
  s.mean_seconds = j.at("mean_seconds").get<double>();
  return s;
}

EvalSummary summarize_range(const std::string& id, const std::vector<const EpisodeRecord*>& eps) {
  EvalSummary s;
  s.task_id = id;
  s.episodes = eps.size();
  for (const EpisodeRecord* e : eps) {
    s.successes += e->success ? 1 : 0;
    s.mean_cost += e->cost;
    s.mean_seconds += e->seconds;
  }
  if (!eps.empty()) {
    const double n = static_cast<double>(eps.size());
    s.success_rate = 100.0 * static_cast<double>(s.successes) / n;
    s.mean_cost /= n;
    s.mean_seconds /= n;
  }
  return s;
}

}  // namespace

json EvalReport::to_json() const {
  json eps = json::array();
  for (const auto& e : episodes) {
    eps.push_back({{"scenario_id", e.scenario_id},
                   {"task_id", e.task_id},
                   {"success", e.success},
                   {"cause", e.cause},
                   {"steps", e.steps},
                   {"cost", e.cost},
                   {"seconds", e.seconds}});
  }
  json tasks = json::array();
  for (const auto& s : per_task) tasks.push_back(summary_to_json(s));
  return {{"scenario_count", scenario_count},
          {"checkpoint_hash", checkpoint_hash},
          {"aggregate", summary_to_json(aggregate)},
          {"per_task", tasks},
          {"episodes", eps}};
}

EvalReport EvalReport::from_json(const json& doc) {
  EvalReport r;
  r.scenario_count = doc.at("scenario_count").get<std::size_t>();
  r.checkpoint_hash = doc.at("checkpoint_hash").get<std::string>();
  r.aggregate = summary_from_json(doc.at("aggregate"));
  for (const auto& s : doc.at("per_task")) r.per_task.push_back(summary_from_json(s));
  for (const auto& e : doc.at("episodes")) {
    EpisodeRecord rec;
    rec.scenario_id = e.at("scenario_id").get<std::string>();
    rec.task_id = e.at("task_id").get<std::string>();
    rec.success = e.at("success").get<bool>();
    rec.cause = e.at("cause").get<std::string>();
    rec.steps = e.at("steps").get<std::size_t>();
    rec.cost = e.at("cost").get<double>();
    rec.seconds = e.at("seconds").get<double>();
    r.episodes.push_back(std::move(rec));
  }
  return r;
}

void summarize(EvalReport& report, const std::vector<std::string>& task_order) {
  std::map<std::string, std::vector<const EpisodeRecord*>> by_task;
  std::vector<const EpisodeRecord*> all;
  for (const auto& e : report.episodes) {
    by_task[e.task_id].push_back(&e);
    all.push_back(&e);
  }
  report.per_task.clear();
  for (const auto& id : task_order) {
    auto it = by_task.find(id);
    if (it != by_task.end()) report.per_task.push_back(summarize_range(id, it->second));
  }
  report.aggregate = summarize_range("all", all);
}

EpisodeRecord greedy_episode(const mam::QNetwork& net, const tensornet::ParameterSet& params, env::Environment& env,
                             const env::Scenario& scenario, std::size_t task) {
  const auto start = std::chrono::steady_clock::now();
  EpisodeRecord rec;
  rec.scenario_id = scenario.scenario_id;
  rec.task_id = env.problem().tasks()[task].id;
  env.reset(scenario, task);
  env::StepResult last;
  while (!env.done()) {
    const auto mask = env.mask();
    if (std::find(mask.begin(), mask.end(), true) == mask.end()) {
      rec.cause = "stuck";
      break;
    }
    const tensornet::Matrix* states[] = {&env.state().features};
    const std::size_t tasks[] = {task};
    const tensornet::Matrix q = net.q_values(mam::make_batch(states, tasks), params);
    last = env.step(mam::greedy_action(q.row(0), mask));
    ++rec.steps;
  }
  if (rec.cause.empty()) rec.cause = std::string(env::to_string(last.cause));
  rec.success = last.cause == env::Termination::success && rec.cause != "stuck";
  rec.cost = std::abs(env::reward_ed(env.grid(), env.state().setpoints_mw));
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

EvalReport evaluate(const mam::QNetwork& net, const tensornet::ParameterSet& params,
                    std::shared_ptr<const env::Problem> problem, std::span<const env::Scenario> scenarios,
                    const env::EnvConfig& cfg) {
  if (scenarios.empty()) throw std::invalid_argument("evaluate: no scenarios");
  if (net.fingerprint() != problem->fingerprint()) {
    throw mam::CheckpointMismatch("evaluate: the network was built for problem " + mam::hex64(net.fingerprint()) +
                                  ", not " + mam::hex64(problem->fingerprint()));
  }
  env::Environment env(problem, cfg);
  EvalReport report;
  report.scenario_count = scenarios.size();
  for (const auto& s : scenarios) {
    for (const auto& id : s.insecure_tasks) {
      report.episodes.push_back(greedy_episode(net, params, env, s, problem->task_index(id)));
    }
  }
  std::vector<std::string> order;
  for (const auto& t : problem->tasks()) order.push_back(t.id);
  summarize(report, order);
  report.checkpoint_hash = mam::hex64(mam::make_checkpoint(net, params).content_hash());
  return report;
}

}  // namespace mamgrid::training
