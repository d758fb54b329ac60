// SPDX-FileCopyrightText: 2026 oar contributors
// SPDX-License-Identifier: Apache-2.0
//
// Adam with bias correction and a reduce-on-plateau learning-rate schedule.

#ifndef OAR_OPTIM_HPP
#define OAR_OPTIM_HPP

#include <cmath>
#include <limits>

#include "oar/errors.hpp"
#include "oar/network.hpp"

namespace oar {

struct AdamState {
  NetworkGrads m;  // first moments, zero-initialized
  NetworkGrads v;  // second moments
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

namespace detail {

template <typename Mat>
void adam_update(Mat& param, const Mat& grad, Mat& m, Mat& v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ShapeMismatchError("gradient shape does not match parameters");
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v.array().matrix() +
      (1.0 - beta2) * grad.array().square().matrix();
  param.array() -=
      lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace detail

/// One Adam step over every parameter tensor; increments the step counter.
inline void adam_step(AdamState& state, NetworkParams& params,
                      const NetworkGrads& grads, double lr) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  detail::adam_update(params.w1, grads.w1, state.m.w1, state.v.w1, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.w2, grads.w2, state.m.w2, state.v.w2, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.w3, grads.w3, state.m.w3, state.v.w3, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.b3, grads.b3, state.m.b3, state.v.b3, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.w4, grads.w4, state.m.w4, state.v.w4, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
  detail::adam_update(params.b4, grads.b4, state.m.b4, state.v.b4, lr,
                      state.beta1, state.beta2, state.epsilon, bc1, bc2);
}

/// Reduce-on-plateau schedule. An epoch "improves" when the monitored loss
/// beats the best seen by at least `rel_threshold` relative; after more than
/// `patience` non-improving epochs in a row the rate is multiplied by
/// `factor` (clamped at `min_lr`) and the counter resets.
struct PlateauScheduler {
  double lr = 1e-4;
  double factor = 0.1;
  int patience = 1;
  double rel_threshold = 1e-4;
  double min_lr = 1e-7;

  double best = std::numeric_limits<double>::quiet_NaN();
  int bad_epochs = 0;

  void step(double epoch_loss) {
    const bool improved =
        std::isnan(best) ||
        (best - epoch_loss) >= rel_threshold * std::abs(best);
    if (improved) {
      best = epoch_loss;
      bad_epochs = 0;
      return;
    }
    ++bad_epochs;
    if (bad_epochs > patience) {
      lr = std::max(lr * factor, min_lr);
      bad_epochs = 0;
    }
  }
};

}  // namespace oar

#endif  // OAR_OPTIM_HPP
