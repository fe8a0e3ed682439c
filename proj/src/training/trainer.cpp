#include "mamgrid/training/trainer.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "mamgrid/training/dqn.hpp"

namespace mamgrid::training {

using nlohmann::json;

mam::FeatureStats scenario_feature_stats(std::shared_ptr<const env::Problem> problem,
                                         std::span<const env::Scenario> scenarios, const env::EnvConfig& cfg) {
  env::Environment env(problem, cfg);
  std::vector<tensornet::Matrix> states;
  for (const auto& s : scenarios) {
    if (s.insecure_tasks.empty()) continue;
    states.push_back(env.reset(s, s.insecure_tasks.front()).features);
  }
  return mam::compute_feature_stats(states);
}

TrainResult run_training(std::shared_ptr<const env::Problem> problem, const mam::ModelConfig& model,
                         std::span<const env::Scenario> train, std::span<const env::Scenario> test,
                         const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train: empty training scenario pool");
  if (test.empty()) throw std::invalid_argument("train: empty test scenario pool");

  // pools[t] = training scenarios insecure for task t
  std::vector<std::vector<std::size_t>> pools(problem->tasks().size());
  for (std::size_t s = 0; s < train.size(); ++s) {
    for (const auto& id : train[s].insecure_tasks) pools[problem->task_index(id)].push_back(s);
  }
  std::vector<std::size_t> tasks;
  for (std::size_t t = 0; t < pools.size(); ++t) {
    if (!pools[t].empty()) tasks.push_back(t);
  }
  if (tasks.empty()) throw std::invalid_argument("train: no scenario is insecure for any task");

  std::seed_seq init_seq{cfg.seed, std::uint64_t{1}}, sample_seq{cfg.seed, std::uint64_t{2}},
      act_seq{cfg.seed, std::uint64_t{3}};
  std::mt19937_64 sample_rng(sample_seq), act_rng(act_seq);
  std::uint64_t init_seed = 0;
  {
    std::mt19937_64 r(init_seq);
    init_seed = r();
  }

  mam::QNetwork net(*problem, model, scenario_feature_stats(problem, train, cfg.env));
  DqnLearner<mam::QNetwork> learner(net, net.init_parameters(init_seed), cfg);
  ReplayBuffer buffer(cfg.buffer_capacity);
  env::Environment env(problem, cfg.env);

  TrainResult result{net, {}, {}, std::nullopt, 0, 0, 0, 0, 0, 0};
  result.best_params = learner.online();
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  std::size_t task = 0;
  bool episode_open = false;

  auto start_episode = [&] {
    task = tasks[std::uniform_int_distribution<std::size_t>(0, tasks.size() - 1)(sample_rng)];
    const auto& pool = pools[task];
    const auto& scenario = train[pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(sample_rng)]];
    env.reset(scenario, task);
    ++result.episodes;
    episode_open = true;
  };

  auto run_eval = [&](std::size_t step) {
    EvalReport report = evaluate(net, learner.online(), problem, test, cfg.env);
    if (!result.best_eval || report.aggregate.success_rate > result.best_eval->aggregate.success_rate) {
      result.best_params = learner.online();
      result.best_step = step;
      result.best_eval = report;
    }
    if (hooks.on_eval) hooks.on_eval(step, report, net, learner.online());
    return report;
  };

  auto emit = [&](std::size_t step, const EvalReport* report) {
    json rec{{"step", step},
             {"loss", loss_count ? json(loss_sum / static_cast<double>(loss_count)) : json(nullptr)},
             {"epsilon", epsilon(step, cfg)},
             {"eval_success_rate", report ? json(report->aggregate.success_rate) : json(nullptr)},
             {"eval_cost", report ? json(report->aggregate.mean_cost) : json(nullptr)}};
    loss_sum = 0.0;
    loss_count = 0;
    if (hooks.on_metrics) hooks.on_metrics(rec);
  };

  std::size_t step = 0;
  bool stopped = false;
  bool evaluated_last = false;
  while (step < cfg.total_steps && !stopped) {
    if (!episode_open) start_episode();
    const std::vector<bool> mask = env.mask();
    if (std::find(mask.begin(), mask.end(), true) == mask.end()) {
      ++result.stuck_episodes;
      episode_open = false;
      continue;
    }
    Transition tr;
    tr.task = task;
    tr.state = env.state().features;
    const tensornet::Matrix* states[] = {&tr.state};
    const std::size_t ts[] = {task};
    const tensornet::Matrix q = net.q_values(mam::make_batch(states, ts), learner.online());
    tr.action = mam::select_action(q.row(0), mask, epsilon(step, cfg), act_rng);
    const env::StepResult r = env.step(tr.action);
    tr.reward = r.reward;
    // Horizon truncation is not a property of the state: keep bootstrapping.
    tr.terminal = r.terminal && r.cause != env::Termination::horizon;
    tr.next_state = env.state().features;
    if (!tr.terminal) tr.next_mask = env.mask();
    buffer.push(std::move(tr));
    if (r.terminal) {
      episode_open = false;
      if (r.cause == env::Termination::divergence) ++result.divergent_episodes;
    }
    ++step;

    if (buffer.size() >= std::max(cfg.warmup, cfg.batch)) {
      if (auto loss = learner.train_step(buffer, sample_rng)) {
        loss_sum += *loss;
        ++loss_count;
      }
    }

    evaluated_last = false;
    if (step % cfg.eval_every == 0) {
      const EvalReport report = run_eval(step);
      emit(step, &report);
      evaluated_last = true;
      if (cfg.stop_success_rate > 0.0 && report.aggregate.success_rate >= cfg.stop_success_rate) stopped = true;
    } else if (step % cfg.log_every == 0) {
      emit(step, nullptr);
    }
  }
  if (!evaluated_last) {
    const EvalReport report = run_eval(step);
    emit(step, &report);
  }
  result.params = learner.online();
  result.steps = step;
  result.updates = learner.updates();
  return result;
}

}  // namespace mamgrid::training
