// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Dense kernels behind the autograd ops. Every kernel has a serial reference path
// and an OpenMP path. Both accumulate each output element in the same order, so
// their results are bit-identical; tests rely on that.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace segsat::kernels {

enum class Exec { kSerial, kParallel };

/// Process-wide default used by the autograd ops.
Exec default_exec();
void set_default_exec(Exec e);

/// C[n x m] (+)= A[n x k] * B[k x m]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
          bool accumulate, Exec exec);

/// C[k x m] (+)= A[n x k]^T * B[n x m]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
             bool accumulate, Exec exec);

/// C[n x m] (+)= A[n x k] * B[m x k]^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m,
             bool accumulate, Exec exec);

/// One query range attending one key range, optionally masked.
struct AttentionBlock {
  std::size_t q_begin = 0;
  std::size_t q_len = 0;
  std::size_t k_begin = 0;
  std::size_t k_len = 0;
  // Offset into AttentionPlan::masks of a q_len x k_len row-major byte mask (1 = visible),
  // or no_mask for full visibility.
  std::size_t mask_offset = no_mask;
  static constexpr std::size_t no_mask = std::numeric_limits<std::size_t>::max();
};

/// Block-diagonal attention pattern. Query ranges of different blocks must not overlap,
/// and neither may key ranges.
struct AttentionPlan {
  std::vector<AttentionBlock> blocks;
  std::vector<std::uint8_t> masks;

  void add_block(std::size_t q_begin, std::size_t q_len, std::size_t k_begin, std::size_t k_len);
  void add_block(std::size_t q_begin, std::size_t q_len, std::size_t k_begin, std::size_t k_len,
                 std::span<const std::uint8_t> mask);
  /// Scratch size for the attention probabilities of `heads` heads.
  std::size_t prob_size(std::size_t heads) const;
  void validate(std::size_t q_rows, std::size_t k_rows) const;
};

/// out = softmax(Q K^T / sqrt(dh)) V per head, dh = d / heads. Q is [q_rows x d],
/// K and V are [k_rows x d]. `probs` receives the per-head probabilities (prob_size).
/// Masked pairs are skipped entirely, so they cannot influence visible outputs.
template <typename T>
void attention_forward(const T* q, const T* k, const T* v, std::size_t d, std::size_t heads,
                       const AttentionPlan& plan, T* out, T* probs, Exec exec);

/// Accumulates into dq, dk, dv.
template <typename T>
void attention_backward(const T* q, const T* k, const T* v, const T* probs, const T* dout,
                        std::size_t d, std::size_t heads, const AttentionPlan& plan, T* dq, T* dk,
                        T* dv, Exec exec);

/// Row-wise layer normalization. Saves the normalized input and inverse std for backward.
template <typename T>
void layer_norm_forward(const T* x, const T* gamma, const T* beta, std::size_t n, std::size_t m,
                        T eps, T* y, T* xhat, T* rstd, Exec exec);

template <typename T>
void layer_norm_backward(const T* dy, const T* xhat, const T* rstd, const T* gamma, std::size_t n,
                         std::size_t m, T* dx, T* dgamma, T* dbeta, Exec exec);

}  // namespace segsat::kernels
