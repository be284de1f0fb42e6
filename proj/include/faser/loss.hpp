#pragma once

// Batch-hard pair mining and Circle Loss.
//
// Mining picks, per anchor, the least-similar same-label example and the
// most-similar different-label example (ties break toward the lowest index).
// The loss follows the margin form with O_p = 1+m, O_n = -m, dp = 1-m,
// dn = m, alpha_p = max(0, O_p - s_p), alpha_n = max(0, s_n - O_n):
//
//   per anchor: softplus( lse_n[ g*alpha_n*(s_n - dn) ] + lse_p[ -g*alpha_p*(s_p - dp) ] )
//
// averaged over anchors. Gradients differentiate through the alpha factors
// (the clamp is the only non-smooth point), so analytic gradients match
// finite differences everywhere away from the clamp boundaries.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "faser/autograd.hpp"
#include "faser/tensor.hpp"

namespace faser {

struct CircleLossConfig {
  float margin = 0.25f;  // m_c
  float gamma = 256.0f;  // scale

  void validate() const {
    if (!(margin > 0.0f && margin < 1.0f))
      throw ContractError("circle loss margin must be in (0, 1)");
    if (!(gamma > 0.0f)) throw ContractError("circle loss gamma must be > 0");
  }
};

struct MinedPairs {
  // Index a is the anchor's position in the batch.
  std::vector<size_t> positive;  // hardest positive index per anchor
  std::vector<size_t> negative;  // hardest negative index per anchor
  std::vector<float> s_p;
  std::vector<float> s_n;

  size_t size() const { return s_p.size(); }
};

// `sim` is the n×n cosine matrix of the batch against itself.
inline MinedPairs mine_batch_hard(const Tensor& sim, const std::vector<std::string>& labels) {
  const size_t n = labels.size();
  if (sim.rows != n || sim.cols != n)
    throw ContractError("mine_batch_hard: similarity matrix shape mismatch");
  MinedPairs out;
  out.positive.resize(n);
  out.negative.resize(n);
  out.s_p.resize(n);
  out.s_n.resize(n);
  for (size_t a = 0; a < n; ++a) {
    bool have_p = false, have_n = false;
    size_t best_p = 0, best_n = 0;
    float sp = 0, sn = 0;
    const float* row = sim.row(a);
    for (size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (!have_p || row[j] < sp) {
          have_p = true;
          sp = row[j];
          best_p = j;
        }
      } else {
        if (!have_n || row[j] > sn) {
          have_n = true;
          sn = row[j];
          best_n = j;
        }
      }
    }
    if (!have_p)
      throw ContractError("batch-hard mining: label \"" + labels[a] +
                          "\" has a single member in the batch");
    if (!have_n)
      throw ContractError("batch-hard mining: batch holds fewer than 2 labels");
    out.positive[a] = best_p;
    out.negative[a] = best_n;
    out.s_p[a] = sp;
    out.s_n[a] = sn;
  }
  return out;
}

namespace detail {

inline double softplus(double z) { return std::fmax(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

struct CircleTerms {
  double o_p, o_n, d_p, d_n;
  explicit CircleTerms(const CircleLossConfig& cfg)
      : o_p(1.0 + cfg.margin), o_n(-double(cfg.margin)), d_p(1.0 - cfg.margin),
        d_n(cfg.margin) {}
};

}  // namespace detail

// Loss over mined hardest pairs; optional per-anchor dL/ds_p, dL/ds_n
// (already including the 1/n_anchors factor of the mean).
inline double circle_loss(const MinedPairs& pairs, const CircleLossConfig& cfg,
                          std::vector<double>* grad_s_p = nullptr,
                          std::vector<double>* grad_s_n = nullptr) {
  cfg.validate();
  const size_t n = pairs.size();
  if (n == 0) throw ContractError("circle_loss: no anchors");
  detail::CircleTerms tm(cfg);
  const double g = cfg.gamma;
  if (grad_s_p) grad_s_p->assign(n, 0.0);
  if (grad_s_n) grad_s_n->assign(n, 0.0);
  double total = 0;
  for (size_t a = 0; a < n; ++a) {
    double sp = pairs.s_p[a], sn = pairs.s_n[a];
    double alpha_p = std::fmax(0.0, tm.o_p - sp);
    double alpha_n = std::fmax(0.0, sn - tm.o_n);
    double z_p = -g * alpha_p * (sp - tm.d_p);
    double z_n = g * alpha_n * (sn - tm.d_n);
    double z = z_p + z_n;
    total += detail::softplus(z);
    if (grad_s_p || grad_s_n) {
      double sig = detail::sigmoid(z);
      if (grad_s_p)
        (*grad_s_p)[a] = alpha_p > 0 ? sig * (-g) * (tm.o_p + tm.d_p - 2.0 * sp) / double(n) : 0.0;
      if (grad_s_n)
        (*grad_s_n)[a] = alpha_n > 0 ? sig * g * (2.0 * sn - tm.o_n - tm.d_n) / double(n) : 0.0;
    }
  }
  return total / double(n);
}

// Fused tape op: mines hardest pairs on the batch similarity matrix, then
// backpropagates d(mean loss)/d(sim) into exactly the mined entries. The
// mined indices are treated as constant under differentiation; the selected
// similarity values are not.
inline NodeId circle_loss_node(Tape& t, NodeId sim, const std::vector<std::string>& labels,
                               const CircleLossConfig& cfg, MinedPairs* mined_out = nullptr) {
  const Tensor& s = t.val(sim);
  MinedPairs pairs = mine_batch_hard(s, labels);
  if (mined_out) *mined_out = pairs;
  std::vector<double> gp, gn;
  double loss = circle_loss(pairs, cfg, &gp, &gn);
  Tensor value(1, 1);
  value.data[0] = static_cast<float>(loss);
  auto held = std::make_shared<MinedPairs>(std::move(pairs));
  auto held_gp = std::make_shared<std::vector<double>>(std::move(gp));
  auto held_gn = std::make_shared<std::vector<double>>(std::move(gn));
  return t.add_op(std::move(value), [sim, held, held_gp, held_gn](Tape& tp, NodeId self) {
    float g0 = tp.grad(self).data[0];
    Tensor& gs = tp.grad(sim);
    for (size_t a = 0; a < held->size(); ++a) {
      gs.at(a, held->positive[a]) += g0 * static_cast<float>((*held_gp)[a]);
      gs.at(a, held->negative[a]) += g0 * static_cast<float>((*held_gn)[a]);
    }
  });
}

// All-pairs variant: every same-label pair and different-label pair of the
// anchor enters its log-sum-exp instead of only the mined ones.
inline NodeId circle_loss_all_pairs_node(Tape& t, NodeId sim,
                                         const std::vector<std::string>& labels,
                                         const CircleLossConfig& cfg) {
  cfg.validate();
  const Tensor& s = t.val(sim);
  const size_t n = labels.size();
  if (s.rows != n || s.cols != n)
    throw ContractError("circle loss: similarity matrix shape mismatch");
  detail::CircleTerms tm(cfg);
  const double g = cfg.gamma;

  // dL/dS entries, filled during the forward sweep (fused op).
  auto grad_sim = std::make_shared<Tensor>(n, n);
  double total = 0;
  std::vector<size_t> pos, neg;
  std::vector<double> xp, xn;
  for (size_t a = 0; a < n; ++a) {
    pos.clear();
    neg.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      (labels[j] == labels[a] ? pos : neg).push_back(j);
    }
    if (pos.empty())
      throw ContractError("circle loss: label \"" + labels[a] +
                          "\" has a single member in the batch");
    if (neg.empty()) throw ContractError("circle loss: batch holds fewer than 2 labels");
    xp.clear();
    xn.clear();
    double max_p = -1e300, max_n = -1e300;
    for (size_t j : pos) {
      double sp = s.at(a, j);
      double alpha = std::fmax(0.0, tm.o_p - sp);
      double x = -g * alpha * (sp - tm.d_p);
      xp.push_back(x);
      max_p = std::fmax(max_p, x);
    }
    for (size_t j : neg) {
      double sn = s.at(a, j);
      double alpha = std::fmax(0.0, sn - tm.o_n);
      double x = g * alpha * (sn - tm.d_n);
      xn.push_back(x);
      max_n = std::fmax(max_n, x);
    }
    double sum_p = 0, sum_n = 0;
    for (double x : xp) sum_p += std::exp(x - max_p);
    for (double x : xn) sum_n += std::exp(x - max_n);
    double lse_p = max_p + std::log(sum_p);
    double lse_n = max_n + std::log(sum_n);
    double z = lse_p + lse_n;
    total += detail::softplus(z);
    double sig = detail::sigmoid(z) / double(n);
    for (size_t k = 0; k < pos.size(); ++k) {
      double sp = s.at(a, pos[k]);
      if (tm.o_p - sp <= 0) continue;
      double w = std::exp(xp[k] - lse_p);
      grad_sim->at(a, pos[k]) +=
          static_cast<float>(sig * w * (-g) * (tm.o_p + tm.d_p - 2.0 * sp));
    }
    for (size_t k = 0; k < neg.size(); ++k) {
      double sn = s.at(a, neg[k]);
      if (sn - tm.o_n <= 0) continue;
      double w = std::exp(xn[k] - lse_n);
      grad_sim->at(a, neg[k]) +=
          static_cast<float>(sig * w * g * (2.0 * sn - tm.o_n - tm.d_n));
    }
  }
  Tensor value(1, 1);
  value.data[0] = static_cast<float>(total / double(n));
  return t.add_op(std::move(value), [sim, grad_sim](Tape& tp, NodeId self) {
    float g0 = tp.grad(self).data[0];
    Tensor& gs = tp.grad(sim);
    for (size_t i = 0; i < gs.size(); ++i) gs.data[i] += g0 * grad_sim->data[i];
  });
}

}  // namespace faser
