// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace segsat {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " x " : "") << s[i];
  os << ']';
  return os.str();
}

namespace {
std::atomic<bool> g_training{false};
thread_local bool t_grad_enabled = true;
}  // namespace

bool is_training() { return g_training.load(std::memory_order_relaxed); }
void set_training(bool on) { g_training.store(on, std::memory_order_relaxed); }
bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <typename T>
void Var<T>::backward() {
  if (node_->value.size() != 1) throw InputError("backward() needs a scalar, got " + shape_string(shape()));
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

namespace ag {

namespace {

using kernels::default_exec;

template <typename T>
Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> fn) {
  Var<T> out(std::move(value), false);
  if (!grad_enabled()) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var<T>& v) { return v.requires_grad(); });
  if (!any) return out;
  Node<T>* n = out.node();
  n->requires_grad = true;
  for (auto& v : inputs) n->inputs.push_back(v.node_ptr());
  n->backward = std::move(fn);
  return out;
}

template <typename T>
Tensor<T>* grad_of(Node<T>& self, std::size_t i) {
  Node<T>* in = self.inputs[i].get();
  return in->requires_grad ? &in->grad_buffer() : nullptr;
}

template <typename T>
void require_matrix(const Var<T>& v, const char* op) {
  if (v.value().rank() != 2) {
    throw InputError(std::string(op) + " expects a matrix, got " + shape_string(v.shape()));
  }
}

template <typename T>
void require_same(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InputError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw InputError("matmul: shape mismatch " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
  }
  Tensor<T> c({n, m});
  kernels::gemm(a.value().data(), b.value().data(), c.data(), n, k, m, false, default_exec());
  return record<T>(std::move(c), {a, b}, [n, k, m](Node<T>& self) {
    const T* dc = self.grad.data();
    if (auto* da = grad_of(self, 0))
      kernels::gemm_nt(dc, self.inputs[1]->value.data(), da->data(), n, m, k, true, default_exec());
    if (auto* db = grad_of(self, 1))
      kernels::gemm_tn(self.inputs[0]->value.data(), dc, db->data(), n, k, m, true, default_exec());
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  if (b.cols() != k) {
    throw InputError("matmul_nt: shape mismatch " + shape_string(a.shape()) + " * " +
                     shape_string(b.shape()) + "^T");
  }
  Tensor<T> c({n, m});
  kernels::gemm_nt(a.value().data(), b.value().data(), c.data(), n, k, m, false, default_exec());
  return record<T>(std::move(c), {a, b}, [n, k, m](Node<T>& self) {
    const T* dc = self.grad.data();
    if (auto* da = grad_of(self, 0))
      kernels::gemm(dc, self.inputs[1]->value.data(), da->data(), n, m, k, true, default_exec());
    if (auto* db = grad_of(self, 1))
      kernels::gemm_tn(dc, self.inputs[0]->value.data(), db->data(), n, m, k, true, default_exec());
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "add");
  Tensor<T> c = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += bv[i];
  return record<T>(std::move(c), {a, b}, [](Node<T>& self) {
    for (std::size_t in = 0; in < 2; ++in) {
      if (auto* g = grad_of(self, in))
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& a, const Var<T>& bias) {
  const std::size_t m = a.cols();
  if (bias.value().size() != m) {
    throw InputError("add_bias: bias " + shape_string(bias.shape()) + " does not match " +
                     shape_string(a.shape()));
  }
  Tensor<T> c = a.value();
  const std::size_t n = c.size() / m;
  const T* bv = bias.value().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < m; ++j) c[r * m + j] += bv[j];
  return record<T>(std::move(c), {a, bias}, [n, m](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < m; ++j) (*g)[j] += self.grad[r * m + j];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same(a, b, "mul");
  Tensor<T> c = a.value();
  const T* bv = b.value().data();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bv[i];
  return record<T>(std::move(c), {a, b}, [](Node<T>& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv2 = self.inputs[1]->value;
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv2[i];
    if (auto* g = grad_of(self, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> c = a.value();
  for (auto& x : c.values()) x *= s;
  return record<T>(std::move(c), {a}, [s](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * s;
  });
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  Tensor<T> c = a.value();
  for (auto& x : c.values()) x = x > T(0) ? x : T(0);
  return record<T>(std::move(c), {a}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& x = self.inputs[0]->value;
      for (std::size_t i = 0; i < g->size(); ++i)
        if (x[i] > T(0)) (*g)[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = 0;
  for (T x : a.value().values()) s += x;
  return record<T>(Tensor<T>({1}, std::vector<T>{s}), {a}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (auto& x : g->values()) x += self.grad[0];
  });
}

template <typename T>
Var<T> softmax(const Var<T>& a) {
  const std::size_t m = a.cols();
  const std::size_t n = a.value().size() / m;
  Tensor<T> y = a.value();
  for (std::size_t r = 0; r < n; ++r) {
    T* row = y.data() + r * m;
    const T mx = *std::max_element(row, row + m);
    T s = 0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= s;
  }
  return record<T>(std::move(y), {a}, [n, m](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      const auto& yv = self.value;
      for (std::size_t r = 0; r < n; ++r) {
        T dot = 0;
        for (std::size_t j = 0; j < m; ++j) dot += self.grad[r * m + j] * yv[r * m + j];
        for (std::size_t j = 0; j < m; ++j)
          (*g)[r * m + j] += yv[r * m + j] * (self.grad[r * m + j] - dot);
      }
    }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  const std::size_t m = x.cols();
  const std::size_t n = x.value().size() / m;
  if (gamma.value().size() != m || beta.value().size() != m) {
    throw InputError("layer_norm: affine parameters do not match width " + std::to_string(m));
  }
  Tensor<T> y(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(n * m);
  auto rstd = std::make_shared<std::vector<T>>(n);
  kernels::layer_norm_forward(x.value().data(), gamma.value().data(), beta.value().data(), n, m,
                              eps, y.data(), xhat->data(), rstd->data(), default_exec());
  return record<T>(std::move(y), {x, gamma, beta}, [n, m, xhat, rstd](Node<T>& self) {
    auto* dx = grad_of(self, 0);
    auto* dg = grad_of(self, 1);
    auto* db = grad_of(self, 2);
    std::vector<T> scratch_x, scratch_g, scratch_b;
    T* dxp = dx ? dx->data() : (scratch_x.resize(n * m), scratch_x.data());
    T* dgp = dg ? dg->data() : (scratch_g.resize(m), scratch_g.data());
    T* dbp = db ? db->data() : (scratch_b.resize(m), scratch_b.data());
    kernels::layer_norm_backward(self.grad.data(), xhat->data(), rstd->data(),
                                 self.inputs[1]->value.data(), n, m, dxp, dgp, dbp, default_exec());
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double p, Rng& rng) {
  if (!is_training() || p <= 0.0) return x;
  if (p >= 1.0) throw InputError("dropout probability must be < 1");
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x.value().size());
  Tensor<T> y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? T(0) : keep_scale;
    y[i] *= (*mask)[i];
  }
  return record<T>(std::move(y), {x}, [mask](Node<T>& self) {
    if (auto* g = grad_of(self, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * (*mask)[i];
  });
}

template <typename T>
Var<T> embedding(const Var<T>& table, std::span<const TokenId> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  auto rows = std::make_shared<std::vector<TokenId>>(ids.begin(), ids.end());
  Tensor<T> y({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw InputError("embedding: id " + std::to_string(ids[r]) + " out of range for table of " +
                       std::to_string(vocab) + " rows");
    }
    auto src = table.value().row(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  return record<T>(std::move(y), {table}, [rows, d](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < rows->size(); ++r) {
        T* dst = g->data() + static_cast<std::size_t>((*rows)[r]) * d;
        const T* src = self.grad.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, std::span<const std::size_t> rows) {
  require_matrix(x, "gather_rows");
  const std::size_t d = x.cols();
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  Tensor<T> y({rows.size(), d});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows()) throw InputError("gather_rows: row index out of range");
    auto src = x.value().row(rows[r]);
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  return record<T>(std::move(y), {x}, [idx, d](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < idx->size(); ++r) {
        T* dst = g->data() + (*idx)[r] * d;
        const T* src = self.grad.data() + r * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
      }
    }
  });
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v,
                 std::shared_ptr<const kernels::AttentionPlan> plan, std::size_t heads) {
  require_matrix(q, "attention");
  require_matrix(k, "attention");
  require_same(k, v, "attention");
  const std::size_t d = q.cols();
  if (k.cols() != d) throw InputError("attention: query and key widths differ");
  if (heads == 0 || d % heads != 0) throw InputError("attention: width not divisible by heads");
  plan->validate(q.rows(), k.rows());
  auto probs = std::make_shared<std::vector<T>>(plan->prob_size(heads));
  Tensor<T> out({q.rows(), d});
  kernels::attention_forward(q.value().data(), k.value().data(), v.value().data(), d, heads, *plan,
                             out.data(), probs->data(), default_exec());
  return record<T>(std::move(out), {q, k, v}, [plan, probs, heads, d](Node<T>& self) {
    auto* dq = grad_of(self, 0);
    auto* dk = grad_of(self, 1);
    auto* dv = grad_of(self, 2);
    std::vector<T> sq, sk, sv;
    T* dqp = dq ? dq->data() : (sq.resize(self.inputs[0]->value.size()), sq.data());
    T* dkp = dk ? dk->data() : (sk.resize(self.inputs[1]->value.size()), sk.data());
    T* dvp = dv ? dv->data() : (sv.resize(self.inputs[2]->value.size()), sv.data());
    kernels::attention_backward(self.inputs[0]->value.data(), self.inputs[1]->value.data(),
                                self.inputs[2]->value.data(), probs->data(), self.grad.data(), d,
                                heads, *plan, dqp, dkp, dvp, default_exec());
  });
}

template <typename T>
Var<T> cross_entropy_label_smoothed(const Var<T>& logits, std::span<const TokenId> targets,
                                    double epsilon, TokenId pad_id,
                                    std::span<const TokenId> excluded) {
  require_matrix(logits, "cross_entropy");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw InputError("label smoothing must lie in [0, 1)");
  const std::size_t n = logits.rows(), vocab = logits.cols();
  if (targets.size() != n) throw InputError("cross_entropy: one target per logit row required");
  std::vector<char> allowed(vocab, 1);
  for (TokenId id : excluded)
    if (id >= 0 && static_cast<std::size_t>(id) < vocab) allowed[static_cast<std::size_t>(id)] = 0;
  const auto n_allowed = static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), 1));
  std::size_t counted = 0;
  for (TokenId t : targets) {
    if (t == pad_id) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab || !allowed[static_cast<std::size_t>(t)]) {
      throw InputError("cross_entropy: target id " + std::to_string(t) + " is not a legal prediction");
    }
    ++counted;
  }
  if (counted == 0) return record<T>(Tensor<T>({1}), {logits}, [](Node<T>&) {});

  const double off = n_allowed > 1 ? epsilon / static_cast<double>(n_allowed - 1) : 0.0;
  const double on = n_allowed > 1 ? 1.0 - epsilon : 1.0;
  // Per-row probabilities, kept for backward.
  auto probs = std::make_shared<std::vector<T>>(n * vocab, T(0));
  auto tgt = std::make_shared<std::vector<TokenId>>(targets.begin(), targets.end());
  double total = 0.0;
  const auto& x = logits.value();
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] == pad_id) continue;
    const T* row = x.data() + r * vocab;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < vocab; ++c)
      if (allowed[c]) mx = std::max(mx, static_cast<double>(row[c]));
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c)
      if (allowed[c]) z += std::exp(static_cast<double>(row[c]) - mx);
    const double lse = mx + std::log(z);
    double loss = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) {
      if (!allowed[c]) continue;
      const double logp = static_cast<double>(row[c]) - lse;
      const double qc = static_cast<TokenId>(c) == targets[r] ? on : off;
      loss -= qc * logp;
      (*probs)[r * vocab + c] = static_cast<T>(std::exp(logp));
    }
    total += loss;
  }
  const double inv_n = 1.0 / static_cast<double>(counted);
  Tensor<T> out({1}, std::vector<T>{static_cast<T>(total * inv_n)});
  return record<T>(std::move(out), {logits},
                   [probs, tgt, allowed, n, vocab, on, off, inv_n, pad_id](Node<T>& self) {
                     auto* g = grad_of(self, 0);
                     if (!g) return;
                     const double up = static_cast<double>(self.grad[0]) * inv_n;
                     for (std::size_t r = 0; r < n; ++r) {
                       if ((*tgt)[r] == pad_id) continue;
                       for (std::size_t c = 0; c < vocab; ++c) {
                         if (!allowed[c]) continue;
                         const double qc = static_cast<TokenId>(c) == (*tgt)[r] ? on : off;
                         (*g)[r * vocab + c] +=
                             static_cast<T>(up * (static_cast<double>((*probs)[r * vocab + c]) - qc));
                       }
                     }
                   });
}

#define SEGSAT_INSTANTIATE_OPS(T)                                                                 \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                        \
  template Var<T> matmul_nt<T>(const Var<T>&, const Var<T>&);                                     \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> add_bias<T>(const Var<T>&, const Var<T>&);                                      \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                           \
  template Var<T> scale<T>(const Var<T>&, T);                                                     \
  template Var<T> relu<T>(const Var<T>&);                                                         \
  template Var<T> sum<T>(const Var<T>&);                                                          \
  template Var<T> softmax<T>(const Var<T>&);                                                      \
  template Var<T> layer_norm<T>(const Var<T>&, const Var<T>&, const Var<T>&, T);                  \
  template Var<T> dropout<T>(const Var<T>&, double, Rng&);                                        \
  template Var<T> embedding<T>(const Var<T>&, std::span<const TokenId>);                          \
  template Var<T> gather_rows<T>(const Var<T>&, std::span<const std::size_t>);                    \
  template Var<T> attention<T>(const Var<T>&, const Var<T>&, const Var<T>&,                       \
                               std::shared_ptr<const kernels::AttentionPlan>, std::size_t);       \
  template Var<T> cross_entropy_label_smoothed<T>(const Var<T>&, std::span<const TokenId>, double, \
                                                  TokenId, std::span<const TokenId>);

SEGSAT_INSTANTIATE_OPS(float)
SEGSAT_INSTANTIATE_OPS(double)

}  // namespace ag

template class Var<float>;
template class Var<double>;

}  // namespace segsat
