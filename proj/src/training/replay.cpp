#include "mamgrid/training/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace mamgrid::training {

bool Transition::bootstraps() const {
  return !terminal && std::find(next_mask.begin(), next_mask.end(), true) != next_mask.end();
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer: index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, std::mt19937_64& rng) const {
  if (items_.empty()) throw std::logic_error("replay buffer: sampling from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Transition*> out(count);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

}  // namespace mamgrid::training
