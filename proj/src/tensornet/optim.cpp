#include "mamgrid/tensornet/optim.hpp"

#include <cmath>

namespace mamgrid::tensornet {

void adam_step(ParameterSet& params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match the parameter set");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (p.grad.rows() != state.m[i].rows() || p.grad.cols() != state.m[i].cols()) {
      throw ShapeError("adam: moment shape mismatch for '" + p.name + "'");
    }
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * p.grad;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= state.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + state.epsilon);
  }
  for (const auto& p : params) {
    if (!p.value.allFinite()) throw NumericError("adam: parameter '" + p.name + "' became non-finite");
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : params) p.grad *= scale;
  }
  return norm;
}

}  // namespace mamgrid::tensornet
