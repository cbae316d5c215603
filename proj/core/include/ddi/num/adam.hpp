#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/num/tensor.hpp"

namespace ddi::num {

// lr(epoch) = base_lr * gamma^floor(epoch / period)
struct StepSchedule {
  double base_lr = 0.001;
  double gamma = 0.5;
  int period = 20;

  double lr(int epoch) const {
    return base_lr * std::pow(gamma, epoch / period);
  }
};

// Bias-corrected Adam moments for one parameter tensor.
template <class T>
struct AdamState {
  Tensor<T> m;
  Tensor<T> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(int rows = 0, int cols = 0) : m(rows, cols), v(rows, cols) {}
};

template <class T>
void adam_step(Tensor<T> &param, const Tensor<T> &grad, AdamState<T> &state,
               const StepSchedule &schedule, int epoch) {
  if (!param.same_shape(grad) || !param.same_shape(state.m))
    throw ShapeMismatch("adam_step param " + shape_str(param) + " vs grad " +
                        shape_str(grad));
  ++state.step;
  double lr = schedule.lr(epoch);
  double b1t = std::pow(state.beta1, static_cast<double>(state.step));
  double b2t = std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.v.size(); ++i) {
    double g = static_cast<double>(grad.v[i]);
    double m = state.beta1 * static_cast<double>(state.m.v[i]) + (1.0 - state.beta1) * g;
    double v = state.beta2 * static_cast<double>(state.v.v[i]) + (1.0 - state.beta2) * g * g;
    state.m.v[i] = static_cast<T>(m);
    state.v.v[i] = static_cast<T>(v);
    double mhat = m / (1.0 - b1t);
    double vhat = v / (1.0 - b2t);
    param.v[i] = static_cast<T>(static_cast<double>(param.v[i]) -
                                lr * mhat / (std::sqrt(vhat) + state.eps));
  }
}

}  // namespace ddi::num
