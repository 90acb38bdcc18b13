// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "segsat/model.hpp"
#include "segsat/optim.hpp"

namespace segsat {

enum class PSchedule { kAnneal, kConstant };

/// Everything a training run needs. Text form is flat key=value with section prefixes:
/// model.* (ModelConfig fields), train.*, prepare.*, data.*.
struct RunConfig {
  ModelConfig model;

  std::size_t k = 4;
  double q = 0.5;
  PSchedule p_schedule = PSchedule::kAnneal;
  double p = 1.0;  // used by the constant schedule
  std::size_t total_steps = 50000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  LrMode lr_mode = LrMode::kLinear;
  std::size_t lr_warmup_steps = 4000;
  double lr_start = 3e-4;
  double lr_end = 1e-5;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 5000;
  std::string init_encoder;  // AT checkpoint whose "encoder." parameters seed the model
  std::string dump_plans;    // optional JSON-lines dump of every DividePlan

  std::size_t min_freq = 1;
  std::size_t max_vocab = 32000;

  std::string train_src;
  std::string train_tgt;
  std::string valid_src;
  std::string valid_tgt;
  std::string vocab;
  std::string train_cache;
  std::string checkpoint_dir;

  /// Bernoulli parameter for the RAND/EQUAL choice at a 1-based optimizer step.
  double p_at(std::size_t step) const;
  LrConfig lr_config() const;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  void set(std::string_view key, std::string_view value);
  std::string to_text() const;
  static RunConfig from_text(std::string_view text);
  static RunConfig from_file(const std::string& path);

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Resolves a run configuration: file (optional), then SEGSAT_SEED, then key=value overrides.
RunConfig resolve_run_config(const std::string& config_path, const std::vector<std::string>& overrides);

/// Defaults mirroring the small-model setting (d_model 278, d_hidden 507, 5 layers, 2 heads).
RunConfig default_run_config();

}  // namespace segsat
