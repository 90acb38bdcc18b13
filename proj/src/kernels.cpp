// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "segsat/error.hpp"

namespace segsat::kernels {

namespace {

std::atomic<Exec> g_exec{Exec::kParallel};

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

bool go_parallel(Exec exec, std::size_t work) { return exec == Exec::kParallel && work >= kParallelWork; }

template <typename T>
inline void gemm_row(const T* a_row, const T* b, T* c_row, std::size_t k, std::size_t m,
                     bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + m, T(0));
  for (std::size_t kk = 0; kk < k; ++kk) {
    const T aik = a_row[kk];
    const T* b_row = b + kk * m;
    for (std::size_t j = 0; j < m; ++j) c_row[j] += aik * b_row[j];
  }
}

template <typename T>
inline void gemm_tn_row(const T* a, const T* b, T* c_row, std::size_t kk, std::size_t n,
                        std::size_t k, std::size_t m, bool accumulate) {
  if (!accumulate) std::fill(c_row, c_row + m, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    const T aik = a[i * k + kk];
    const T* b_row = b + i * m;
    for (std::size_t j = 0; j < m; ++j) c_row[j] += aik * b_row[j];
  }
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

inline bool visible(const AttentionPlan& plan, const AttentionBlock& b, std::size_t r,
                    std::size_t c) {
  return b.mask_offset == AttentionBlock::no_mask || plan.masks[b.mask_offset + r * b.k_len + c];
}

std::vector<std::size_t> prob_offsets(const AttentionPlan& plan, std::size_t heads) {
  std::vector<std::size_t> off(plan.blocks.size());
  std::size_t acc = 0;
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    off[i] = acc;
    acc += heads * plan.blocks[i].q_len * plan.blocks[i].k_len;
  }
  return off;
}

template <typename T>
void attention_task(const T* q, const T* k, const T* v, std::size_t d, std::size_t dh,
                    std::size_t h, const AttentionPlan& plan, const AttentionBlock& blk, T* out,
                    T* probs) {
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t col = h * dh;
  for (std::size_t r = 0; r < blk.q_len; ++r) {
    const T* q_row = q + (blk.q_begin + r) * d + col;
    T* p_row = probs + (h * blk.q_len + r) * blk.k_len;
    T max_score = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < blk.k_len; ++c) {
      if (!visible(plan, blk, r, c)) {
        p_row[c] = T(0);
        continue;
      }
      const T s = dot(q_row, k + (blk.k_begin + c) * d + col, dh) * scale;
      p_row[c] = s;
      max_score = any ? std::max(max_score, s) : s;
      any = true;
    }
    T* o_row = out + (blk.q_begin + r) * d + col;
    std::fill(o_row, o_row + dh, T(0));
    if (!any) continue;
    T sum = 0;
    for (std::size_t c = 0; c < blk.k_len; ++c) {
      if (!visible(plan, blk, r, c)) continue;
      const T e = std::exp(p_row[c] - max_score);
      p_row[c] = e;
      sum += e;
    }
    const T inv = T(1) / sum;
    for (std::size_t c = 0; c < blk.k_len; ++c) {
      if (!visible(plan, blk, r, c)) continue;
      p_row[c] *= inv;
      const T p = p_row[c];
      const T* v_row = v + (blk.k_begin + c) * d + col;
      for (std::size_t j = 0; j < dh; ++j) o_row[j] += p * v_row[j];
    }
  }
}

template <typename T>
void attention_backward_task(const T* q, const T* k, const T* v, const T* probs, const T* dout,
                             std::size_t d, std::size_t dh, std::size_t h,
                             const AttentionPlan& plan, const AttentionBlock& blk, T* dq, T* dk,
                             T* dv) {
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::size_t col = h * dh;
  std::vector<T> ds(blk.k_len);
  for (std::size_t r = 0; r < blk.q_len; ++r) {
    const T* p_row = probs + (h * blk.q_len + r) * blk.k_len;
    const T* do_row = dout + (blk.q_begin + r) * d + col;
    const T* q_row = q + (blk.q_begin + r) * d + col;
    T weighted = 0;
    for (std::size_t c = 0; c < blk.k_len; ++c) {
      if (!visible(plan, blk, r, c)) {
        ds[c] = T(0);
        continue;
      }
      const T dp = dot(do_row, v + (blk.k_begin + c) * d + col, dh);
      ds[c] = dp;
      weighted += p_row[c] * dp;
    }
    T* dq_row = dq + (blk.q_begin + r) * d + col;
    for (std::size_t c = 0; c < blk.k_len; ++c) {
      if (!visible(plan, blk, r, c)) continue;
      const T p = p_row[c];
      const T g = p * (ds[c] - weighted) * scale;
      const std::size_t key = (blk.k_begin + c) * d + col;
      for (std::size_t j = 0; j < dh; ++j) {
        dq_row[j] += g * k[key + j];
        dk[key + j] += g * q_row[j];
        dv[key + j] += p * do_row[j];
      }
    }
  }
}

}  // namespace

Exec default_exec() { return g_exec.load(std::memory_order_relaxed); }
void set_default_exec(Exec e) { g_exec.store(e, std::memory_order_relaxed); }

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
          bool accumulate, Exec exec) {
  if (go_parallel(exec, n * k * m)) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) gemm_row(a + i * k, b, c + i * m, k, m, accumulate);
  } else {
    for (std::size_t i = 0; i < n; ++i) gemm_row(a + i * k, b, c + i * m, k, m, accumulate);
  }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
             bool accumulate, Exec exec) {
  if (go_parallel(exec, n * k * m)) {
#pragma omp parallel for schedule(static)
    for (std::size_t kk = 0; kk < k; ++kk) gemm_tn_row(a, b, c + kk * m, kk, n, k, m, accumulate);
  } else {
    for (std::size_t kk = 0; kk < k; ++kk) gemm_tn_row(a, b, c + kk * m, kk, n, k, m, accumulate);
  }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
             bool accumulate, Exec exec) {
  std::vector<T> bt(k * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t kk = 0; kk < k; ++kk) bt[kk * m + j] = b[j * k + kk];
  gemm(a, bt.data(), c, n, k, m, accumulate, exec);
}

void AttentionPlan::add_block(std::size_t q_begin, std::size_t q_len, std::size_t k_begin,
                              std::size_t k_len) {
  blocks.push_back({q_begin, q_len, k_begin, k_len, AttentionBlock::no_mask});
}

void AttentionPlan::add_block(std::size_t q_begin, std::size_t q_len, std::size_t k_begin,
                              std::size_t k_len, std::span<const std::uint8_t> mask) {
  if (mask.size() != q_len * k_len) throw InputError("attention mask size does not match block");
  blocks.push_back({q_begin, q_len, k_begin, k_len, masks.size()});
  masks.insert(masks.end(), mask.begin(), mask.end());
}

std::size_t AttentionPlan::prob_size(std::size_t heads) const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += heads * b.q_len * b.k_len;
  return n;
}

void AttentionPlan::validate(std::size_t q_rows, std::size_t k_rows) const {
  std::size_t q_end = 0;
  std::size_t k_end = 0;
  for (const auto& b : blocks) {
    if (b.q_begin < q_end || b.k_begin < k_end) {
      throw InputError("attention blocks must be ordered and must not overlap");
    }
    q_end = b.q_begin + b.q_len;
    k_end = b.k_begin + b.k_len;
    if (q_end > q_rows || k_end > k_rows) throw InputError("attention block exceeds its inputs");
  }
}

template <typename T>
void attention_forward(const T* q, const T* k, const T* v, std::size_t d, std::size_t heads,
                       const AttentionPlan& plan, T* out, T* probs, Exec exec) {
  const std::size_t dh = d / heads;
  const auto off = prob_offsets(plan, heads);
  const std::size_t tasks = plan.blocks.size() * heads;
  std::size_t work = 0;
  for (const auto& b : plan.blocks) work += b.q_len * b.k_len * d;
  if (go_parallel(exec, work)) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t t = 0; t < tasks; ++t) {
      const std::size_t bi = t / heads;
      attention_task(q, k, v, d, dh, t % heads, plan, plan.blocks[bi], out, probs + off[bi]);
    }
  } else {
    for (std::size_t t = 0; t < tasks; ++t) {
      const std::size_t bi = t / heads;
      attention_task(q, k, v, d, dh, t % heads, plan, plan.blocks[bi], out, probs + off[bi]);
    }
  }
}

template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* dout,
                        std::size_t d, std::size_t heads, const AttentionPlan& plan, T* dq, T* dk,
                        T* dv, Exec exec) {
  const std::size_t dh = d / heads;
  const auto off = prob_offsets(plan, heads);
  const std::size_t tasks = plan.blocks.size() * heads;
  std::size_t work = 0;
  for (const auto& b : plan.blocks) work += b.q_len * b.k_len * d;
  if (go_parallel(exec, work)) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t t = 0; t < tasks; ++t) {
      const std::size_t bi = t / heads;
      attention_backward_task(q, k, v, probs + off[bi], dout, d, dh, t % heads, plan,
                              plan.blocks[bi], dq, dk, dv);
    }
  } else {
    for (std::size_t t = 0; t < tasks; ++t) {
      const std::size_t bi = t / heads;
      attention_backward_task(q, k, v, probs + off[bi], dout, d, dh, t % heads, plan,
                              plan.blocks[bi], dq, dk, dv);
    }
  }
}

template <typename T>
void layer_norm_forward(const T* x, const T* gamma, const T* beta, std::size_t n, std::size_t m,
                        T eps, T* y, T* xhat, T* rstd, Exec exec) {
  auto row = [&](std::size_t r) {
    const T* xr = x + r * m;
    T mean = 0;
    for (std::size_t j = 0; j < m; ++j) mean += xr[j];
    mean /= static_cast<T>(m);
    T var = 0;
    for (std::size_t j = 0; j < m; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(m);
    const T inv = T(1) / std::sqrt(var + eps);
    rstd[r] = inv;
    for (std::size_t j = 0; j < m; ++j) {
      const T h = (xr[j] - mean) * inv;
      xhat[r * m + j] = h;
      y[r * m + j] = h * gamma[j] + beta[j];
    }
  };
  if (go_parallel(exec, n * m * 8)) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < n; ++r) row(r);
  } else {
    for (std::size_t r = 0; r < n; ++r) row(r);
  }
}

template <typename T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd, const T* gamma, std::size_t n,
                         std::size_t m, T* dx, T* dgamma, T* dbeta, Exec exec) {
  auto row = [&](std::size_t r) {
    const T* dyr = dy + r * m;
    const T* hr = xhat + r * m;
    T mean1 = 0;
    T mean2 = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const T g = dyr[j] * gamma[j];
      mean1 += g;
      mean2 += g * hr[j];
    }
    mean1 /= static_cast<T>(m);
    mean2 /= static_cast<T>(m);
    for (std::size_t j = 0; j < m; ++j) {
      dx[r * m + j] += rstd[r] * (dyr[j] * gamma[j] - mean1 - hr[j] * mean2);
    }
  };
  if (go_parallel(exec, n * m * 8)) {
#pragma omp parallel for schedule(static)
    for (std::size_t r = 0; r < n; ++r) row(r);
  } else {
    for (std::size_t r = 0; r < n; ++r) row(r);
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      dgamma[j] += dy[r * m + j] * xhat[r * m + j];
      dbeta[j] += dy[r * m + j];
    }
  }
}

#define SEGSAT_INSTANTIATE_KERNELS(T)                                                           \
  template void gemm<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool,   \
                        Exec);                                                                  \
  template void gemm_tn<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool, \
                           Exec);                                                               \
  template void gemm_nt<T>(const T*, const T*, T*, std::size_t, std::size_t, std::size_t, bool, \
                           Exec);                                                               \
  template void attention_forward<T>(const T*, const T*, const T*, std::size_t, std::size_t,   \
                                     const AttentionPlan&, T*, T*, Exec);                       \
  template void attention_backward<T>(const T*, const T*, const T*, const T*, const T*,        \
                                      std::size_t, std::size_t, const AttentionPlan&, T*, T*,   \
                                      T*, Exec);                                                \
  template void layer_norm_forward<T>(const T*, const T*, const T*, std::size_t, std::size_t, T, \
                                      T*, T*, T*, Exec);                                        \
  template void layer_norm_backward<T>(const T*, const T*, const T*, const T*, std::size_t,    \
                                       std::size_t, T*, T*, T*, Exec);

SEGSAT_INSTANTIATE_KERNELS(float)
SEGSAT_INSTANTIATE_KERNELS(double)

}  // namespace segsat::kernels
