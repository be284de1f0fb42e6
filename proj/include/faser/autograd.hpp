#pragma once

// Tape-based reverse-mode autodiff over 2D float tensors.
//
// A Tape is built once per training step: ops append nodes in topological
// order and backward() replays them in reverse. Parameter leaves point at
// caller-owned value/gradient storage, so gradients from successive tapes
// accumulate naturally (gradient accumulation needs no extra machinery).
//
// Backward lambdas capture node ids, never references or pointers into the
// node vector: it may reallocate while the graph is being built.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "faser/tensor.hpp"

namespace faser {

using NodeId = size_t;

class Tape {
 public:
  // Backward callbacks receive the tape and the node's own id.
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  NodeId leaf(const Tensor* value, Tensor* grad) {
    if (grad && !grad->same_shape(*value))
      throw ContractError("leaf gradient accumulator shape mismatch");
    Node n;
    n.external_value = value;
    n.external_grad = grad;
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.grad = Tensor::zeros(n.value.rows, n.value.cols);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  // Extension point for fused ops: `backward` reads grad(self) and
  // accumulates into the parents via grad().
  NodeId add_op(Tensor value, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.grad = Tensor::zeros(n.value.rows, n.value.cols);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  const Tensor& val(NodeId id) const {
    const Node& n = nodes_[id];
    return n.external_value ? *n.external_value : n.value;
  }

  Tensor& grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.external_grad) return *n.external_grad;
    return n.grad;
  }

  // Seeds d(root)/d(root) = seed_value and propagates to every leaf.
  void backward(NodeId root, float seed_value = 1.0f) {
    Tensor& g = grad(root);
    if (g.size() != 1) throw ContractError("backward root must be a scalar node");
    g.data[0] += seed_value;
    for (size_t i = nodes_.size(); i-- > 0;)
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const Tensor* external_value = nullptr;
    Tensor* external_grad = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

namespace ops {

inline NodeId add(Tape& t, NodeId a, NodeId b) {
  const Tensor& va = t.val(a);
  if (!va.same_shape(t.val(b))) throw ContractError("add: shape mismatch");
  Tensor out = va;
  emap(out) += emap(t.val(b));
  return t.add_op(std::move(out), [a, b](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    emap(tp.grad(a)) += emap(g);
    emap(tp.grad(b)) += emap(g);
  });
}

inline NodeId scale(Tape& t, NodeId x, float s) {
  Tensor out = t.val(x);
  emap(out) *= s;
  return t.add_op(std::move(out), [x, s](Tape& tp, NodeId self) {
    emap(tp.grad(x)) += s * emap(tp.grad(self));
  });
}

// out[i, :] = table[indices[i], :]
inline NodeId gather_rows(Tape& t, NodeId table, std::vector<int32_t> indices) {
  const Tensor& tab = t.val(table);
  for (int32_t idx : indices)
    if (idx < 0 || static_cast<size_t>(idx) >= tab.rows)
      throw ContractError("gather_rows: index " + std::to_string(idx) +
                          " outside table of " + std::to_string(tab.rows) + " rows");
  Tensor out(indices.size(), tab.cols);
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy(tab.row(static_cast<size_t>(indices[i])),
              tab.row(static_cast<size_t>(indices[i])) + tab.cols, out.row(i));
  auto idx = std::make_shared<std::vector<int32_t>>(std::move(indices));
  return t.add_op(std::move(out), [table, idx](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    Tensor& gt = tp.grad(table);
    for (size_t i = 0; i < idx->size(); ++i) {
      float* dst = gt.row(static_cast<size_t>((*idx)[i]));
      const float* src = g.row(i);
      for (size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

// out = x·w + b, with x: N×I, w: I×O, b: 1×O
inline NodeId linear(Tape& t, NodeId x, NodeId w, NodeId b) {
  const Tensor& vx = t.val(x);
  const Tensor& vw = t.val(w);
  const Tensor& vb = t.val(b);
  if (vx.cols != vw.rows) throw ContractError("linear: input/weight shape mismatch");
  check_shape(vb, 1, vw.cols, "linear bias");
  Tensor out(vx.rows, vw.cols);
  emap(out).noalias() = emap(vx) * emap(vw);
  emap(out).rowwise() += emap(vb).row(0);
  return t.add_op(std::move(out), [x, w, b](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    emap(tp.grad(x)).noalias() += emap(g) * emap(tp.val(w)).transpose();
    emap(tp.grad(w)).noalias() += emap(tp.val(x)).transpose() * emap(g);
    emap(tp.grad(b)).row(0) += emap(g).colwise().sum();
  });
}

// Per-row layer norm with learned gain/bias (1×C each).
inline NodeId layer_norm(Tape& t, NodeId x, NodeId gain, NodeId bias, float eps = 1e-5f) {
  const Tensor& vx = t.val(x);
  check_shape(t.val(gain), 1, vx.cols, "layer_norm gain");
  check_shape(t.val(bias), 1, vx.cols, "layer_norm bias");
  const size_t C = vx.cols;
  Tensor out(vx.rows, C);
  auto xhat = std::make_shared<Tensor>(vx.rows, C);
  auto inv_std = std::make_shared<std::vector<float>>(vx.rows);
  const Tensor& vg = t.val(gain);
  const Tensor& vb = t.val(bias);
  for (size_t r = 0; r < vx.rows; ++r) {
    const float* xr = vx.row(r);
    double mu = 0;
    for (size_t c = 0; c < C; ++c) mu += xr[c];
    mu /= double(C);
    double var = 0;
    for (size_t c = 0; c < C; ++c) {
      double d = xr[c] - mu;
      var += d * d;
    }
    var /= double(C);
    float inv = 1.0f / std::sqrt(static_cast<float>(var) + eps);
    (*inv_std)[r] = inv;
    float* hr = xhat->row(r);
    float* outr = out.row(r);
    for (size_t c = 0; c < C; ++c) {
      hr[c] = (xr[c] - static_cast<float>(mu)) * inv;
      outr[c] = hr[c] * vg.data[c] + vb.data[c];
    }
  }
  return t.add_op(std::move(out), [x, gain, bias, xhat, inv_std](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    Tensor& gg = tp.grad(gain);
    Tensor& gb = tp.grad(bias);
    const Tensor& vg = tp.val(gain);
    const size_t C = g.cols;
    for (size_t r = 0; r < g.rows; ++r) {
      const float* gr = g.row(r);
      const float* hr = xhat->row(r);
      float inv = (*inv_std)[r];
      double sum_dh = 0, sum_dh_h = 0;
      for (size_t c = 0; c < C; ++c) {
        gg.data[c] += gr[c] * hr[c];
        gb.data[c] += gr[c];
        double dh = double(gr[c]) * vg.data[c];
        sum_dh += dh;
        sum_dh_h += dh * hr[c];
      }
      double mean_dh = sum_dh / double(C);
      double mean_dh_h = sum_dh_h / double(C);
      float* gxr = gx.row(r);
      for (size_t c = 0; c < C; ++c) {
        double dh = double(gr[c]) * vg.data[c];
        gxr[c] += static_cast<float>(inv * (dh - mean_dh - double(hr[c]) * mean_dh_h));
      }
    }
  });
}

// Exact (erf) GELU.
inline NodeId gelu(Tape& t, NodeId x) {
  constexpr float inv_sqrt2 = 0.7071067811865476f;
  const Tensor& vx = t.val(x);
  Tensor out(vx.rows, vx.cols);
  for (size_t i = 0; i < vx.size(); ++i) {
    float v = vx.data[i];
    out.data[i] = 0.5f * v * (1.0f + std::erf(v * inv_sqrt2));
  }
  return t.add_op(std::move(out), [x](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx = tp.val(x);
    Tensor& gx = tp.grad(x);
    constexpr float inv_sqrt_2pi = 0.3989422804014327f;
    for (size_t i = 0; i < vx.size(); ++i) {
      float v = vx.data[i];
      float cdf = 0.5f * (1.0f + std::erf(v * inv_sqrt2));
      float pdf = inv_sqrt_2pi * std::exp(-0.5f * v * v);
      gx.data[i] += g.data[i] * (cdf + v * pdf);
    }
  });
}

// Inverted dropout; identity when disabled or rate == 0.
inline NodeId dropout(Tape& t, NodeId x, float rate, std::mt19937& rng, bool enabled) {
  if (!enabled || rate <= 0.0f) return x;
  if (rate >= 1.0f) throw ContractError("dropout rate must be < 1");
  const Tensor& vx = t.val(x);
  auto mask = std::make_shared<Tensor>(vx.rows, vx.cols);
  std::bernoulli_distribution keep(1.0 - rate);
  float inv_keep = 1.0f / (1.0f - rate);
  Tensor out(vx.rows, vx.cols);
  for (size_t i = 0; i < vx.size(); ++i) {
    float m = keep(rng) ? inv_keep : 0.0f;
    mask->data[i] = m;
    out.data[i] = vx.data[i] * m;
  }
  return t.add_op(std::move(out), [x, mask](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * mask->data[i];
  });
}

inline NodeId take_row(Tape& t, NodeId x, size_t row) {
  const Tensor& vx = t.val(x);
  if (row >= vx.rows) throw ContractError("take_row: row out of range");
  Tensor out(1, vx.cols);
  std::copy(vx.row(row), vx.row(row) + vx.cols, out.row(0));
  return t.add_op(std::move(out), [x, row](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    float* dst = tp.grad(x).row(row);
    for (size_t c = 0; c < g.cols; ++c) dst[c] += g.data[c];
  });
}

// Stacks K row vectors (each 1×C) into a K×C matrix.
inline NodeId stack_rows(Tape& t, const std::vector<NodeId>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty input");
  const size_t C = t.val(rows[0]).cols;
  Tensor out(rows.size(), C);
  for (size_t i = 0; i < rows.size(); ++i) {
    check_shape(t.val(rows[i]), 1, C, "stack_rows input");
    std::copy(t.val(rows[i]).row(0), t.val(rows[i]).row(0) + C, out.row(i));
  }
  auto ids = std::make_shared<std::vector<NodeId>>(rows);
  return t.add_op(std::move(out), [ids](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    for (size_t i = 0; i < ids->size(); ++i) {
      float* dst = tp.grad((*ids)[i]).row(0);
      const float* src = g.row(i);
      for (size_t c = 0; c < g.cols; ++c) dst[c] += src[c];
    }
  });
}

// Per-row L2 normalization; all-zero rows stay zero.
inline NodeId l2_normalize_rows(Tape& t, NodeId x) {
  const Tensor& vx = t.val(x);
  Tensor out(vx.rows, vx.cols);
  auto norms = std::make_shared<std::vector<float>>(vx.rows);
  for (size_t r = 0; r < vx.rows; ++r) {
    const float* xr = vx.row(r);
    double ss = 0;
    for (size_t c = 0; c < vx.cols; ++c) ss += double(xr[c]) * xr[c];
    float n = static_cast<float>(std::sqrt(ss));
    (*norms)[r] = n;
    float inv = n > 1e-12f ? 1.0f / n : 0.0f;
    for (size_t c = 0; c < vx.cols; ++c) out.row(r)[c] = xr[c] * inv;
  }
  auto y = std::make_shared<Tensor>(out);
  return t.add_op(std::move(out), [x, y, norms](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    Tensor& gx = tp.grad(x);
    for (size_t r = 0; r < g.rows; ++r) {
      float n = (*norms)[r];
      if (n <= 1e-12f) continue;
      const float* gr = g.row(r);
      const float* yr = y->row(r);
      double dot = 0;
      for (size_t c = 0; c < g.cols; ++c) dot += double(gr[c]) * yr[c];
      float* gxr = gx.row(r);
      for (size_t c = 0; c < g.cols; ++c)
        gxr[c] += static_cast<float>((gr[c] - dot * yr[c]) / n);
    }
  });
}

// out = a·bᵀ, with a: M×K, b: N×K (cosine matrix when rows are unit-norm).
inline NodeId matmul_nt(Tape& t, NodeId a, NodeId b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.cols != vb.cols) throw ContractError("matmul_nt: inner dimension mismatch");
  Tensor out(va.rows, vb.rows);
  emap(out).noalias() = emap(va) * emap(vb).transpose();
  return t.add_op(std::move(out), [a, b](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    emap(tp.grad(a)).noalias() += emap(g) * emap(tp.val(b));
    emap(tp.grad(b)).noalias() += emap(g).transpose() * emap(tp.val(a));
  });
}

}  // namespace ops

}  // namespace faser
