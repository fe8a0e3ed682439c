#pragma once

#include <concepts>
#include <optional>
#include <span>
#include <vector>

#include "mamgrid/mam/network.hpp"
#include "mamgrid/tensornet/optim.hpp"
#include "mamgrid/tensornet/tape.hpp"
#include "mamgrid/training/config.hpp"
#include "mamgrid/training/replay.hpp"

namespace mamgrid::training {

/// Anything mapping a stacked state batch to B x |A| Q values, on a tape
/// (trainable) or directly (frozen parameters).
template <class M>
concept QModel = requires(const M& m, tensornet::Tape& t, const mam::Batch& b, tensornet::ParameterSet& ps,
                          const tensornet::ParameterSet& cps) {
  { m.forward(t, b, ps).q } -> std::convertible_to<tensornet::Var>;
  { m.q_values(b, cps) } -> std::convertible_to<tensornet::Matrix>;
};

inline mam::Batch state_batch(std::span<const Transition* const> batch, bool next) {
  std::vector<const tensornet::Matrix*> states;
  std::vector<std::size_t> tasks;
  for (const Transition* t : batch) {
    states.push_back(next ? &t->next_state : &t->state);
    tasks.push_back(t->task);
  }
  return mam::make_batch(states, tasks);
}

/// Double DQN: online parameters pick the next action, the target copy
/// evaluates it. y = r for transitions that do not bootstrap.
template <QModel M>
tensornet::Matrix td_targets(const M& model, const tensornet::ParameterSet& online,
                             const tensornet::ParameterSet& target, std::span<const Transition* const> batch,
                             double gamma) {
  tensornet::Matrix y(static_cast<Eigen::Index>(batch.size()), 1);
  std::vector<const Transition*> live;
  std::vector<Eigen::Index> rows;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    y(static_cast<Eigen::Index>(k), 0) = batch[k]->reward;
    if (batch[k]->bootstraps() && gamma != 0.0) {
      live.push_back(batch[k]);
      rows.push_back(static_cast<Eigen::Index>(k));
    }
  }
  if (live.empty()) return y;
  const mam::Batch next = state_batch(live, true);
  const tensornet::Matrix q_online = model.q_values(next, online);
  const tensornet::Matrix q_target = model.q_values(next, target);
  for (std::size_t k = 0; k < live.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    const std::size_t a = mam::greedy_action(q_online.row(r), live[k]->next_mask);
    y(rows[k], 0) += gamma * q_target(r, static_cast<Eigen::Index>(a));
  }
  return y;
}

/// Online/target parameter pair with its optimizer.
template <QModel M>
class DqnLearner {
 public:
  DqnLearner(const M& model, tensornet::ParameterSet init, const TrainConfig& cfg)
      : model_(&model), online_(std::move(init)), target_(online_), cfg_(cfg) {
    adam_.lr = cfg.lr;
  }

  /// One gradient step on the given transitions; returns the pre-step loss.
  double train_on(std::span<const Transition* const> batch) {
    const tensornet::Matrix y = td_targets(*model_, online_, target_, batch, cfg_.gamma);
    std::vector<std::size_t> actions;
    for (const Transition* t : batch) actions.push_back(t->action);
    const mam::Batch states = state_batch(batch, false);
    online_.zero_grad();
    tensornet::Tape tape;
    const tensornet::Var loss = tape.mse(tape.pick(model_->forward(tape, states, online_).q, actions), y);
    const double value = tape.value(loss)(0, 0);
    tape.backward(loss);
    tensornet::clip_grad_norm(online_, cfg_.grad_clip);
    tensornet::adam_step(online_, adam_);
    if (++updates_ % cfg_.target_sync == 0) sync_target();
    return value;
  }

  /// Samples a minibatch and trains on it; nullopt while the buffer holds
  /// fewer than `batch` transitions.
  std::optional<double> train_step(const ReplayBuffer& buffer, std::mt19937_64& rng) {
    if (buffer.size() < cfg_.batch) return std::nullopt;
    const auto batch = buffer.sample(cfg_.batch, rng);
    return train_on(batch);
  }

  double loss_on(std::span<const Transition* const> batch) const {
    const tensornet::Matrix y = td_targets(*model_, online_, target_, batch, cfg_.gamma);
    const tensornet::Matrix q = model_->q_values(state_batch(batch, false), online_);
    double total = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const double d = q(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(batch[k]->action)) -
                       y(static_cast<Eigen::Index>(k), 0);
      total += d * d;
    }
    return total / static_cast<double>(batch.size());
  }

  void sync_target() { target_.copy_values_from(online_); }

  const tensornet::ParameterSet& online() const { return online_; }
  tensornet::ParameterSet& online() { return online_; }
  const tensornet::ParameterSet& target() const { return target_; }
  tensornet::ParameterSet& target() { return target_; }
  std::size_t updates() const { return updates_; }
  const M& model() const { return *model_; }

 private:
  const M* model_;
  tensornet::ParameterSet online_;
  tensornet::ParameterSet target_;
  tensornet::AdamState adam_;
  TrainConfig cfg_;
  std::size_t updates_ = 0;
};

}  // namespace mamgrid::training
