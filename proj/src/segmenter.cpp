// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/segmenter.hpp"

#include <algorithm>
#include <json.hpp>

#include "segsat/error.hpp"

namespace segsat {

namespace {

void check_divisible(std::size_t t, std::size_t k) {
  if (k == 0) throw InputError("segment count must be >= 1");
  if (t < k) {
    throw InputError("cannot cut " + std::to_string(t) + " tokens into " + std::to_string(k) +
                     " non-empty segments");
  }
}

}  // namespace

TokenIds SegmentedTarget::reconstruct() const {
  TokenIds out;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    if (terminals[j] == kDel) continue;
    out.insert(out.end(), segments[j].begin(), segments[j].end());
  }
  return out;
}

Boundaries equal_divide(std::size_t t, std::size_t k) {
  check_divisible(t, k);
  Boundaries r;
  r.reserve(k - 1);
  for (std::size_t j = 1; j < k; ++j) r.push_back((j * t + k - 1) / k);
  return r;
}

Boundaries rand_divide(std::size_t t, std::size_t k, Rng& rng) {
  check_divisible(t, k);
  // Partial Fisher-Yates over the candidate offsets 1..t-1.
  std::vector<std::size_t> pool(t - 1);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i + 1;
  const std::size_t m = k - 1;
  for (std::size_t i = 0; i < m; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size() - 1)));
    std::swap(pool[i], pool[j]);
  }
  Boundaries r(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(r.begin(), r.end());
  return r;
}

DividePlan sample_divide(std::size_t t, std::size_t k, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("Bernoulli parameter must lie in [0, 1]");
  check_divisible(t, k);
  DividePlan plan;
  plan.target_len = t;
  plan.k = k;
  if (rng.bernoulli(p)) {
    plan.mode = DivideMode::kRandom;
    plan.boundaries = rand_divide(t, k, rng);
  } else {
    plan.mode = DivideMode::kEqual;
    plan.boundaries = equal_divide(t, k);
  }
  return plan;
}

double anneal_p(std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) throw InputError("total_steps must be >= 1");
  if (step >= total_steps) return 0.0;
  return 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
}

std::vector<TokenIds> apply_plan(std::span<const TokenId> tokens, const DividePlan& plan) {
  if (tokens.size() != plan.target_len) throw InputError("plan length does not match tokens");
  std::vector<TokenIds> segments;
  std::size_t begin = 0;
  for (std::size_t j = 0; j <= plan.boundaries.size(); ++j) {
    const std::size_t end = j < plan.boundaries.size() ? plan.boundaries[j] : tokens.size();
    segments.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                          tokens.begin() + static_cast<std::ptrdiff_t>(end));
    begin = end;
  }
  return segments;
}

SegmentedTarget inject_pseudo_repeat(std::vector<TokenIds> segments, double q, Rng& rng,
                                     DividePlan plan) {
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("injection probability must lie in [0, 1]");
  SegmentedTarget out;
  out.plan = std::move(plan);
  out.plan.injected.reset();
  if (segments.empty() || !rng.bernoulli(q)) {
    out.terminals.assign(segments.size(), kEos);
    out.segments = std::move(segments);
    return out;
  }
  const auto i = static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(segments.size()) - 1));
  const auto& src = segments[i];
  // An empty source segment has no prefix to copy; callers never produce one.
  if (src.empty()) throw InputError("cannot inject after an empty segment");
  const auto m = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(src.size())));
  TokenIds pseudo(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(m));

  for (std::size_t j = 0; j < segments.size(); ++j) {
    out.segments.push_back(std::move(segments[j]));
    out.terminals.push_back(kEos);
    if (j == i) {
      out.segments.push_back(pseudo);
      out.terminals.push_back(kDel);
    }
  }
  out.plan.injected = Injection{i, m};
  return out;
}

SegmentedTarget make_training_target(std::span<const TokenId> tokens, std::size_t k, double p,
                                     double q, Rng& rng) {
  if (k == 0) throw InputError("segment count must be >= 1");
  if (tokens.empty()) throw InputError("cannot segment an empty target");
  const std::size_t t = tokens.size();
  // A pseudo segment needs at least one real segment to its left.
  const bool inject = k >= 2 && rng.bernoulli(q);
  const std::size_t real_k = std::min(inject ? k - 1 : k, t);
  DividePlan plan = sample_divide(t, real_k, p, rng);
  auto segments = apply_plan(tokens, plan);
  return inject_pseudo_repeat(std::move(segments), inject ? 1.0 : 0.0, rng, std::move(plan));
}

std::string plan_to_json(const DividePlan& plan) {
  nlohmann::json j;
  j["target_len"] = plan.target_len;
  j["k"] = plan.k;
  j["boundaries"] = plan.boundaries;
  j["mode"] = plan.mode == DivideMode::kEqual ? "equal" : "random";
  if (plan.injected) {
    j["injected"] = {{"segment", plan.injected->segment}, {"prefix_len", plan.injected->prefix_len}};
  } else {
    j["injected"] = nullptr;
  }
  return j.dump();
}

}  // namespace segsat
