#include "ataseg/adam.hpp"

#include <cmath>
#include <string>

#include "ataseg/error.hpp"

namespace ataseg {

AdamState AdamState::fresh(std::size_t n, const AdamConfig& config) {
  AdamState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.lr = config.lr;
  s.beta1 = config.beta1;
  s.beta2 = config.beta2;
  s.eps = config.eps;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grad,
               AdamState& state) {
  if (params.size() != grad.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw UsageError("adam_step: params (" + std::to_string(params.size()) +
                     "), grad (" + std::to_string(grad.size()) +
                     ") and moments (" + std::to_string(state.m.size()) +
                     ") must have equal length");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

}  // namespace ataseg
