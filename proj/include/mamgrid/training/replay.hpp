#pragma once

#include <random>
#include <vector>

#include "mamgrid/tensornet/parameters.hpp"

namespace mamgrid::training {

/// One stored step. `next_mask` is the action mask of the next state; a
/// next state with no legal action bootstraps like a terminal one.
struct Transition {
  std::size_t task = 0;
  tensornet::Matrix state;
  std::size_t action = 0;
  double reward = 0.0;
  tensornet::Matrix next_state;
  std::vector<bool> next_mask;
  bool terminal = false;

  bool bootstraps() const;
};

/// Fixed-capacity ring buffer with FIFO eviction and uniform sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Position 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// `count` uniform draws with replacement.
  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot of the oldest item once full
  std::vector<Transition> items_;
};

}  // namespace mamgrid::training
