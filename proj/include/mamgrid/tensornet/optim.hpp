#pragma once

#include <vector>

#include "mamgrid/tensornet/parameters.hpp"

namespace mamgrid::tensornet {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

/// One Adam update with bias correction from the gradients stored in
/// `params`. Moments are allocated on first use.
void adam_step(ParameterSet& params, AdamState& state);

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace mamgrid::tensornet
