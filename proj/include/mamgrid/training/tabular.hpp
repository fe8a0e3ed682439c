#pragma once

#include <cstdint>
#include <vector>

#include "mamgrid/mam/network.hpp"
#include "mamgrid/tensornet/tape.hpp"
#include "mamgrid/training/config.hpp"

namespace mamgrid::training {

/// Deterministic finite MDP. States are encoded as 1 x 1 feature matrices
/// holding the state index so they flow through the same batch path as
/// grid states.
struct TabularMdp {
  std::vector<std::vector<std::size_t>> next;  // [state][action]
  std::vector<std::vector<double>> reward;
  std::vector<std::vector<bool>> terminal;

  std::size_t states() const { return next.size(); }
  std::size_t actions() const { return next.empty() ? 0 : next[0].size(); }
};

/// Two states, two actions. s0: a0 pays 1 and stays, a1 pays 0 and moves to
/// s1. s1: a0 pays 0 and returns to s0, a1 pays 2 and stays.
TabularMdp toy_mdp();

/// Q table as a single S x A parameter ("table").
class TabularQ {
 public:
  struct Forward {
    tensornet::Var q;
  };

  TabularQ(std::size_t states, std::size_t actions) : states_(states), actions_(actions) {}

  tensornet::ParameterSet init_parameters() const;
  Forward forward(tensornet::Tape& tape, const mam::Batch& batch, tensornet::ParameterSet& params) const;
  tensornet::Matrix q_values(const mam::Batch& batch, const tensornet::ParameterSet& params) const;

 private:
  tensornet::Matrix one_hot(const mam::Batch& batch) const;

  std::size_t states_;
  std::size_t actions_;
};

/// Fills a buffer with `transitions` uniformly random (state, action) steps
/// of the MDP and runs `steps` DQN updates; returns the learned table.
tensornet::Matrix train_tabular(const TabularMdp& mdp, const TrainConfig& cfg, std::size_t transitions,
                                std::size_t steps, std::vector<double>* losses = nullptr);

}  // namespace mamgrid::training
