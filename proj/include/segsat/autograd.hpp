// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Minimal reverse-mode autograd over dense matrices. Only the ops the transformer needs.
// Each op records a closure that accumulates gradients into its inputs when recording
// is enabled on the calling thread.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "segsat/kernels.hpp"
#include "segsat/random.hpp"
#include "segsat/tensor.hpp"
#include "segsat/vocab.hpp"

namespace segsat {

/// Process-wide train/eval switch. Dropout is active only in training mode.
bool is_training();
void set_training(bool on);

/// Per-thread gradient recording switch.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  /// The accumulated gradient; zeros when nothing has flowed in yet.
  const Tensor<T>& grad() const { return node_->grad_buffer(); }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }

  /// Backpropagate from this scalar.
  void backward();

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// A named trainable leaf.
template <typename T>
struct Parameter {
  std::string name;
  Var<T> var;
};

template <typename T>
using ParameterPtr = std::shared_ptr<Parameter<T>>;

namespace ag {

template <typename T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// a * b^T
template <typename T> Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
/// Adds a length-m vector to every row of an [n x m] matrix.
template <typename T> Var<T> add_bias(const Var<T>& a, const Var<T>& bias);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T s);
template <typename T> Var<T> relu(const Var<T>& a);
template <typename T> Var<T> sum(const Var<T>& a);
/// Row-wise softmax.
template <typename T> Var<T> softmax(const Var<T>& a);
/// Row-wise normalization with eps inside the square root, then gamma/beta.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));
/// Inverted dropout; identity outside training mode or when p == 0.
template <typename T> Var<T> dropout(const Var<T>& x, double p, Rng& rng);
template <typename T> Var<T> embedding(const Var<T>& table, std::span<const TokenId> ids);
template <typename T> Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> rows);
/// Multi-head scaled dot-product attention over a block-diagonal plan.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 std::shared_ptr<const kernels::AttentionPlan> plan, std::size_t heads);

/// Mean label-smoothed cross entropy over positions whose target is not `pad_id`.
/// `excluded` ids are removed from the softmax and from the smoothing mass, so the
/// target distribution puts 1-eps on the gold id and eps/(|allowed|-1) on every other
/// allowed id. Returns 0 with zero gradient when every target is padding.
template <typename T>
Var<T> cross_entropy_label_smoothed(const Var<T>& logits, std::span<const TokenId> targets,
                                    double epsilon, TokenId pad_id,
                                    std::span<const TokenId> excluded = {});

}  // namespace ag
}  // namespace segsat
