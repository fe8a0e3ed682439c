#include "mamgrid/training/tabular.hpp"

#include <random>
#include <stdexcept>

#include "mamgrid/training/dqn.hpp"

namespace mamgrid::training {

using tensornet::Matrix;

TabularMdp toy_mdp() {
  TabularMdp m;
  m.next = {{0, 1}, {0, 1}};
  m.reward = {{1.0, 0.0}, {0.0, 2.0}};
  m.terminal = {{false, false}, {false, false}};
  return m;
}

tensornet::ParameterSet TabularQ::init_parameters() const {
  tensornet::ParameterSet ps;
  ps.add("table", static_cast<Eigen::Index>(states_), static_cast<Eigen::Index>(actions_));
  return ps;
}

Matrix TabularQ::one_hot(const mam::Batch& batch) const {
  if (batch.features.cols() != 1 || batch.features.rows() != batch.size()) {
    throw tensornet::ShapeError("tabular batch: expected one 1 x 1 state per row");
  }
  Matrix h = Matrix::Zero(batch.size(), static_cast<Eigen::Index>(states_));
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto s = static_cast<Eigen::Index>(batch.features(b, 0));
    if (s < 0 || s >= h.cols()) throw tensornet::ShapeError("tabular batch: state index out of range");
    h(b, s) = 1.0;
  }
  return h;
}

TabularQ::Forward TabularQ::forward(tensornet::Tape& tape, const mam::Batch& batch,
                                    tensornet::ParameterSet& params) const {
  return {tape.matmul(tape.constant(one_hot(batch)), tape.param(params.at("table")))};
}

Matrix TabularQ::q_values(const mam::Batch& batch, const tensornet::ParameterSet& params) const {
  return one_hot(batch) * params.at("table").value;
}

Matrix train_tabular(const TabularMdp& mdp, const TrainConfig& cfg, std::size_t transitions, std::size_t steps,
                     std::vector<double>* losses) {
  if (mdp.states() == 0 || mdp.actions() == 0) throw std::invalid_argument("tabular MDP is empty");
  TabularQ model(mdp.states(), mdp.actions());
  DqnLearner<TabularQ> learner(model, model.init_parameters(), cfg);
  ReplayBuffer buffer(cfg.buffer_capacity);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> state(0, mdp.states() - 1), action(0, mdp.actions() - 1);
  for (std::size_t i = 0; i < transitions; ++i) {
    const std::size_t s = state(rng), a = action(rng);
    Transition t;
    t.state = Matrix::Constant(1, 1, static_cast<double>(s));
    t.action = a;
    t.reward = mdp.reward[s][a];
    t.next_state = Matrix::Constant(1, 1, static_cast<double>(mdp.next[s][a]));
    t.next_mask.assign(mdp.actions(), true);
    t.terminal = mdp.terminal[s][a];
    buffer.push(std::move(t));
  }
  for (std::size_t i = 0; i < steps; ++i) {
    const auto loss = learner.train_step(buffer, rng);
    if (losses && loss) losses->push_back(*loss);
  }
  return learner.online().at("table").value;
}

}  // namespace mamgrid::training
