// Adam with bias correction and a step-decay learning-rate schedule.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nsf/common.hpp"

namespace nsf {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
struct AdamState {
  AdamParams hp;
  std::vector<T> m1, m2;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamParams params = {}) : hp(params), m1(n, T(0)), m2(n, T(0)) {}
};

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.m1.size() || params.size() != state.m2.size())
    throw UsageError("adam_step: parameter, gradient and state sizes differ");
  ++state.step;
  const double b1 = state.hp.beta1, b2 = state.hp.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t n = 0; n < params.size(); ++n) {
    const double g = grads[n];
    const double m = b1 * state.m1[n] + (1.0 - b1) * g;
    const double v = b2 * state.m2[n] + (1.0 - b2) * g * g;
    state.m1[n] = static_cast<T>(m);
    state.m2[n] = static_cast<T>(v);
    params[n] = static_cast<T>(params[n] - lr * (m / c1) / (std::sqrt(v / c2) + state.hp.epsilon));
  }
}

/// lr0 / factor^floor(iteration / every).
struct LrSchedule {
  double lr0 = 5e-5;
  int decay_every = 3333;
  double decay_factor = 10.0;

  double at(int iteration) const {
    if (iteration < 0) throw UsageError("iteration must be non-negative");
    if (decay_every <= 0) return lr0;
    return lr0 / std::pow(decay_factor, iteration / decay_every);
  }
};

}  // namespace nsf
