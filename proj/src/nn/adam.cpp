#include "mpat/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace mpat::nn {

namespace {

template <class P>
AdamState make_state(std::span<P const> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Tensor* p : params) {
    s.first_moment.push_back(zeros_like(*p));
    s.second_moment.push_back(zeros_like(*p));
  }
  return s;
}

}  // namespace

AdamState AdamState::for_params(std::span<Tensor* const> params, AdamConfig config) {
  return make_state<Tensor*>(params, config);
}

AdamState AdamState::for_params(std::span<const Tensor* const> params, AdamConfig config) {
  return make_state<const Tensor*>(params, config);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k]->shape() || params[k]->shape() != state.first_moment[k].shape()) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(k));
    }
    grads[k]->require_finite("adam_step gradient");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    auto g = grads[k]->data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace mpat::nn
