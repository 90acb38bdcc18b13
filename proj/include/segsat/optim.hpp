// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segsat/autograd.hpp"

namespace segsat {

enum class LrMode { kWarmup, kLinear };

struct LrConfig {
  LrMode mode = LrMode::kLinear;
  std::size_t d_model = 278;
  std::size_t warmup_steps = 4000;
  double linear_start = 3e-4;
  double linear_end = 1e-5;
  std::size_t total_steps = 50000;
};

/// warmup: d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).
/// linear: linear_start at step 1 down to linear_end at total_steps (held after).
double lr_schedule(std::size_t step, const LrConfig& config);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

/// First/second moment accumulators, one pair per parameter, plus the step counter.
template <typename T>
struct OptimizerState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;
  double base_lr = 0.0;
};

/// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParameterPtr<T>> params, AdamConfig config = {});

  /// Applies one update with learning rate `lr`, then zeroes every gradient.
  void step(double lr);
  void zero_grad();

  const std::vector<ParameterPtr<T>>& params() const { return params_; }
  OptimizerState<T>& state() { return state_; }
  const OptimizerState<T>& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<ParameterPtr<T>> params_;
  AdamConfig config_;
  OptimizerState<T> state_;
};

}  // namespace segsat
