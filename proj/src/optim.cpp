// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/optim.hpp"

#include <algorithm>
#include <cmath>

namespace segsat {

double lr_schedule(std::size_t step, const LrConfig& config) {
  if (step < 1) throw InputError("learning-rate schedule is defined for step >= 1");
  const double s = static_cast<double>(step);
  if (config.mode == LrMode::kWarmup) {
    const double warm = static_cast<double>(std::max<std::size_t>(config.warmup_steps, 1));
    return std::pow(static_cast<double>(config.d_model), -0.5) *
           std::min(std::pow(s, -0.5), s * std::pow(warm, -1.5));
  }
  if (config.total_steps <= 1) return config.linear_start;
  const double frac = std::min(1.0, (s - 1.0) / static_cast<double>(config.total_steps - 1));
  return config.linear_start + (config.linear_end - config.linear_start) * frac;
}

template <typename T>
Adam<T>::Adam(std::vector<ParameterPtr<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    state_.first_moment.emplace_back(p->var.shape());
    state_.second_moment.emplace_back(p->var.shape());
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++state_.step;
  state_.base_lr = lr;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& var = params_[i]->var;
    const auto& g = var.grad();
    auto& w = var.mutable_value();
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      w[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
  zero_grad();
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p->var.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace segsat
