#include "mamgrid/training/config.hpp"

#include <algorithm>
#include <stdexcept>

namespace mamgrid::training {

using nlohmann::json;

json TrainConfig::to_json() const {
  return {{"gamma", gamma},
          {"lr", lr},
          {"batch", batch},
          {"batch_unit", batch_unit},
          {"buffer_capacity", buffer_capacity},
          {"target_sync", target_sync},
          {"epsilon_start", epsilon_start},
          {"epsilon_end", epsilon_end},
          {"epsilon_decay_steps", epsilon_decay_steps},
          {"warmup", warmup},
          {"total_steps", total_steps},
          {"eval_every", eval_every},
          {"log_every", log_every},
          {"grad_clip", grad_clip},
          {"stop_success_rate", stop_success_rate},
          {"seed", seed},
          {"horizon", env.horizon},
          {"decrease_factor", env.decrease_factor},
          {"increase_factor", env.increase_factor},
          {"reward_weights", {{"pf", env.weights.pf}, {"ed", env.weights.ed}, {"terminal", env.weights.terminal}}}};
}

TrainConfig TrainConfig::from_json(const json& doc) {
  static const char* known[] = {"gamma",        "lr",          "batch",          "batch_unit",    "buffer_capacity",
                                "target_sync",  "epsilon_start", "epsilon_end",  "epsilon_decay_steps",
                                "warmup",       "total_steps", "eval_every",     "log_every",     "grad_clip",
                                "stop_success_rate", "seed",   "horizon",        "decrease_factor",
                                "increase_factor", "reward_weights"};
  if (!doc.is_object()) throw std::invalid_argument("train config: expected a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw std::invalid_argument("train config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.gamma = doc.value("gamma", c.gamma);
    c.lr = doc.value("lr", c.lr);
    c.batch = doc.value("batch", c.batch);
    c.batch_unit = doc.value("batch_unit", c.batch_unit);
    c.buffer_capacity = doc.value("buffer_capacity", c.buffer_capacity);
    c.target_sync = doc.value("target_sync", c.target_sync);
    c.epsilon_start = doc.value("epsilon_start", c.epsilon_start);
    c.epsilon_end = doc.value("epsilon_end", c.epsilon_end);
    c.epsilon_decay_steps = doc.value("epsilon_decay_steps", c.epsilon_decay_steps);
    c.warmup = doc.value("warmup", c.warmup);
    c.total_steps = doc.value("total_steps", c.total_steps);
    c.eval_every = doc.value("eval_every", c.eval_every);
    c.log_every = doc.value("log_every", c.log_every);
    c.grad_clip = doc.value("grad_clip", c.grad_clip);
    c.stop_success_rate = doc.value("stop_success_rate", c.stop_success_rate);
    c.seed = doc.value("seed", c.seed);
    c.env.horizon = doc.value("horizon", c.env.horizon);
    c.env.decrease_factor = doc.value("decrease_factor", c.env.decrease_factor);
    c.env.increase_factor = doc.value("increase_factor", c.env.increase_factor);
    if (doc.contains("reward_weights")) {
      const json& w = doc.at("reward_weights");
      c.env.weights.pf = w.value("pf", c.env.weights.pf);
      c.env.weights.ed = w.value("ed", c.env.weights.ed);
      c.env.weights.terminal = w.value("terminal", c.env.weights.terminal);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(lr > 0.0, "lr must be positive");
  require(batch > 0, "batch must be positive");
  require(batch_unit == "transition", "only batch_unit = \"transition\" is supported");
  require(buffer_capacity >= batch, "buffer_capacity must be at least batch");
  require(target_sync > 0, "target_sync must be positive");
  require(epsilon_start >= epsilon_end && epsilon_end >= 0.0 && epsilon_start <= 1.0,
          "epsilon schedule must be non-increasing within [0, 1]");
  require(eval_every > 0 && log_every > 0, "eval_every and log_every must be positive");
  require(grad_clip > 0.0, "grad_clip must be positive");
  require(env.horizon > 0, "horizon must be positive");
  require(env.decrease_factor > 0.0 && env.decrease_factor < 1.0 && env.increase_factor > 1.0,
          "action factors must satisfy 0 < decrease < 1 < increase");
}

double epsilon(std::size_t step, const TrainConfig& cfg) {
  if (cfg.epsilon_decay_steps == 0 || step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.epsilon_decay_steps);
  return cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start);
}

}  // namespace mamgrid::training
