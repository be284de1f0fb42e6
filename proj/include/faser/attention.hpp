#pragma once

// Sliding-window multi-head attention with designated global positions.
//
// Position i attends to j when |i-j| <= W/2; positions flagged global attend
// to every unmasked position and are attended by every unmasked query. A pair
// (i, j) touching a global position on either side is scored and valued
// through the global Q/K/V tensors, all other pairs through the local ones.
// Masked (PAD) keys are excluded from every key set; masked query rows come
// out as zeros.
//
// Key sets are enumerated as window plus global positions, never as a full
// L x L scan for local queries, keeping cost linear in sequence length.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "faser/autograd.hpp"
#include "faser/tensor.hpp"

namespace faser {
namespace ops {

namespace detail {

struct AttnCache {
  // Per query: (key index, pair-uses-global flag), window keys first in
  // ascending order, then out-of-window global keys ascending.
  std::vector<std::vector<std::pair<uint32_t, uint8_t>>> allowed;
  // Per query: num_heads * allowed.size() softmax probabilities, head-major.
  std::vector<std::vector<float>> probs;
};

}  // namespace detail

// The six projection ids may alias (tied local/global projections); gradients
// then accumulate into the shared tensors.
inline NodeId window_attention(Tape& t, NodeId q_local, NodeId k_local, NodeId v_local,
                               NodeId q_global, NodeId k_global, NodeId v_global,
                               const std::vector<uint8_t>& attention_mask,
                               const std::vector<uint8_t>& global_mask, size_t window,
                               size_t num_heads) {
  const Tensor& ql = t.val(q_local);
  const size_t L = ql.rows;
  const size_t H = ql.cols;
  for (NodeId id : {k_local, v_local, q_global, k_global, v_global})
    if (!t.val(id).same_shape(ql))
      throw ContractError("window_attention: projection shape mismatch");
  if (attention_mask.size() != L || global_mask.size() != L)
    throw ContractError("window_attention: mask length mismatch");
  if (window % 2 != 0) throw ContractError("window_attention: window must be even");
  if (num_heads == 0 || H % num_heads != 0)
    throw ContractError("window_attention: hidden dim not divisible by heads");

  const size_t d = H / num_heads;
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
  const size_t half = window / 2;

  std::vector<uint32_t> global_keys;
  for (size_t j = 0; j < L; ++j)
    if (attention_mask[j] && global_mask[j]) global_keys.push_back(static_cast<uint32_t>(j));

  auto cache = std::make_shared<detail::AttnCache>();
  cache->allowed.resize(L);
  cache->probs.resize(L);

  const Tensor& kl = t.val(k_local);
  const Tensor& vl = t.val(v_local);
  const Tensor& qg = t.val(q_global);
  const Tensor& kg = t.val(k_global);
  const Tensor& vg = t.val(v_global);

  Tensor out = Tensor::zeros(L, H);
  std::vector<float> scores;
  for (size_t i = 0; i < L; ++i) {
    if (!attention_mask[i]) continue;
    auto& allowed = cache->allowed[i];
    const bool qi_global = global_mask[i] != 0;
    const size_t lo = i > half ? i - half : 0;
    const size_t hi = std::min(L - 1, i + half);
    if (qi_global) {
      for (size_t j = 0; j < L; ++j)
        if (attention_mask[j]) allowed.emplace_back(static_cast<uint32_t>(j), 1);
    } else {
      for (size_t j = lo; j <= hi; ++j)
        if (attention_mask[j]) allowed.emplace_back(static_cast<uint32_t>(j), global_mask[j]);
      for (uint32_t j : global_keys)
        if (j < lo || j > hi) allowed.emplace_back(j, 1);
    }
    if (allowed.empty()) continue;

    const size_t T = allowed.size();
    auto& probs = cache->probs[i];
    probs.resize(num_heads * T);
    scores.resize(T);
    for (size_t h = 0; h < num_heads; ++h) {
      const size_t off = h * d;
      float max_score = -std::numeric_limits<float>::infinity();
      for (size_t tix = 0; tix < T; ++tix) {
        auto [j, use_global] = allowed[tix];
        const float* qrow = (use_global ? qg : ql).row(i) + off;
        const float* krow = (use_global ? kg : kl).row(j) + off;
        float s = 0;
        for (size_t c = 0; c < d; ++c) s += qrow[c] * krow[c];
        s *= inv_sqrt_d;
        scores[tix] = s;
        max_score = std::max(max_score, s);
      }
      float denom = 0;
      for (size_t tix = 0; tix < T; ++tix) {
        float e = std::exp(scores[tix] - max_score);
        probs[h * T + tix] = e;
        denom += e;
      }
      float inv_denom = 1.0f / denom;
      float* orow = out.row(i) + off;
      for (size_t tix = 0; tix < T; ++tix) {
        float p = probs[h * T + tix] * inv_denom;
        probs[h * T + tix] = p;
        const float* vrow = (allowed[tix].second ? vg : vl).row(allowed[tix].first) + off;
        for (size_t c = 0; c < d; ++c) orow[c] += p * vrow[c];
      }
    }
  }

  return t.add_op(std::move(out), [q_local, k_local, v_local, q_global, k_global, v_global,
                                   num_heads, cache](Tape& tp, NodeId self) {
    const Tensor& g = tp.grad(self);
    const Tensor& ql = tp.val(q_local);
    const Tensor& kl = tp.val(k_local);
    const Tensor& vl = tp.val(v_local);
    const Tensor& qg = tp.val(q_global);
    const Tensor& kg = tp.val(k_global);
    const Tensor& vg = tp.val(v_global);
    Tensor& gql = tp.grad(q_local);
    Tensor& gkl = tp.grad(k_local);
    Tensor& gvl = tp.grad(v_local);
    Tensor& gqg = tp.grad(q_global);
    Tensor& gkg = tp.grad(k_global);
    Tensor& gvg = tp.grad(v_global);
    const size_t L = ql.rows;
    const size_t d = ql.cols / num_heads;
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(d));
    std::vector<float> dp;
    for (size_t i = 0; i < L; ++i) {
      const auto& allowed = cache->allowed[i];
      if (allowed.empty()) continue;
      const size_t T = allowed.size();
      const auto& probs = cache->probs[i];
      dp.resize(T);
      for (size_t h = 0; h < num_heads; ++h) {
        const size_t off = h * d;
        const float* grow = g.row(i) + off;
        const float* pr = probs.data() + h * T;
        double sum_pd = 0;
        for (size_t tix = 0; tix < T; ++tix) {
          auto [j, use_global] = allowed[tix];
          const float* vrow = (use_global ? vg : vl).row(j) + off;
          float* gvrow = (use_global ? gvg : gvl).row(j) + off;
          float dpt = 0;
          for (size_t c = 0; c < d; ++c) {
            dpt += grow[c] * vrow[c];
            gvrow[c] += pr[tix] * grow[c];
          }
          dp[tix] = dpt;
          sum_pd += double(pr[tix]) * dpt;
        }
        for (size_t tix = 0; tix < T; ++tix) {
          auto [j, use_global] = allowed[tix];
          float ds = pr[tix] * (dp[tix] - static_cast<float>(sum_pd));
          if (ds == 0.0f) continue;
          const float* qrow = (use_global ? qg : ql).row(i) + off;
          const float* krow = (use_global ? kg : kl).row(j) + off;
          float* gqrow = (use_global ? gqg : gql).row(i) + off;
          float* gkrow = (use_global ? gkg : gkl).row(j) + off;
          const float c0 = ds * inv_sqrt_d;
          for (size_t c = 0; c < d; ++c) {
            gqrow[c] += c0 * krow[c];
            gkrow[c] += c0 * qrow[c];
          }
        }
      }
    }
  });
}

}  // namespace ops

// Forward-only convenience over plain tensors (the q/k/v inputs are the
// already-projected local and global sequences).
inline Tensor sliding_window_attention(const Tensor& q_local, const Tensor& k_local,
                                       const Tensor& v_local, const Tensor& q_global,
                                       const Tensor& k_global, const Tensor& v_global,
                                       const std::vector<uint8_t>& attention_mask,
                                       const std::vector<uint8_t>& global_mask, size_t window,
                                       size_t num_heads) {
  Tape t;
  NodeId ql = t.constant(q_local);
  NodeId kl = t.constant(k_local);
  NodeId vl = t.constant(v_local);
  NodeId qg = t.constant(q_global);
  NodeId kg = t.constant(k_global);
  NodeId vg = t.constant(v_global);
  NodeId out = ops::window_attention(t, ql, kl, vl, qg, kg, vg, attention_mask, global_mask,
                                     window, num_heads);
  return t.val(out);
}

}  // namespace faser
