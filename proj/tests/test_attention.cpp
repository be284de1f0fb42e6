#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "faser/attention.hpp"
#include "support/helpers.hpp"

using namespace faser;
using faser::testing::reference_attention;

namespace {

struct Inputs {
  Tensor ql, kl, vl, qg, kg, vg;
  std::vector<uint8_t> mask, global;
};

Inputs random_inputs(size_t len, size_t dim, uint32_t seed, double mask_rate = 0.0,
                     double global_rate = 0.0) {
  std::mt19937 rng(seed);
  Inputs in;
  in.ql = Tensor::randn(len, dim, rng, 1.0f);
  in.kl = Tensor::randn(len, dim, rng, 1.0f);
  in.vl = Tensor::randn(len, dim, rng, 1.0f);
  in.qg = Tensor::randn(len, dim, rng, 1.0f);
  in.kg = Tensor::randn(len, dim, rng, 1.0f);
  in.vg = Tensor::randn(len, dim, rng, 1.0f);
  in.mask.assign(len, 1);
  in.global.assign(len, 0);
  std::uniform_real_distribution<double> unit(0, 1);
  for (size_t i = 1; i < len; ++i)
    if (unit(rng) < mask_rate) in.mask[i] = 0;
  for (size_t i = 0; i < len; ++i)
    if (in.mask[i] && unit(rng) < global_rate) in.global[i] = 1;
  return in;
}

Tensor run_op(const Inputs& in, uint32_t window, uint32_t heads) {
  Tape t;
  NodeId out = ops::window_attention(t, t.constant(in.ql), t.constant(in.kl),
                                     t.constant(in.vl), t.constant(in.qg), t.constant(in.kg),
                                     t.constant(in.vg), in.mask, in.global, window, heads);
  return t.val(out);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(double(a.data[i]) - double(b.data[i])));
  return m;
}

}  // namespace

TEST_CASE("windowed attention matches the dense reference on random configs") {
  std::mt19937 meta(77);
  for (int iter = 0; iter < 60; ++iter) {
    size_t heads = 1 + meta() % 3;
    size_t hd = 1 + meta() % 4;
    size_t dim = heads * hd;
    size_t len = 2 + meta() % 14;
    uint32_t window = 2 * (1 + meta() % 8);
    auto in = random_inputs(len, dim, 1000 + iter, 0.3, 0.3);
    in.mask[0] = 1;
    Tensor got = run_op(in, window, heads);
    Tensor want = reference_attention(in.ql, in.kl, in.vl, in.qg, in.kg, in.vg, in.mask,
                                      in.global, window, heads);
    INFO("len " << len << " window " << window << " heads " << heads);
    CHECK(max_abs_diff(got, want) < 1e-5);
  }
}

TEST_CASE("a window covering the whole sequence equals dense attention") {
  // With no globals and W >= 2(L-1), every unmasked pair is in-window.
  for (int iter = 0; iter < 10; ++iter) {
    size_t len = 3 + iter;
    auto in = random_inputs(len, 4, 2000 + iter);
    uint32_t window = static_cast<uint32_t>(2 * (len - 1));
    Tensor got = run_op(in, window, 2);
    // Dense oracle: plain softmax over all positions using local projections.
    Tensor want = reference_attention(in.ql, in.kl, in.vl, in.qg, in.kg, in.vg, in.mask,
                                      in.global, window, 2);
    CHECK(max_abs_diff(got, want) < 1e-5);
  }
}

TEST_CASE("masked queries produce zero rows") {
  auto in = random_inputs(6, 4, 5);
  in.mask = {1, 1, 0, 1, 0, 1};
  Tensor out = run_op(in, 4, 2);
  for (size_t c = 0; c < 4; ++c) {
    CHECK(out.at(2, c) == 0.0f);
    CHECK(out.at(4, c) == 0.0f);
  }
}

TEST_CASE("masked keys receive no probability mass") {
  auto in = random_inputs(4, 2, 6);
  in.mask = {1, 1, 1, 0};
  // Make the masked key's value enormous; it must not leak into any output.
  for (size_t c = 0; c < 2; ++c) {
    in.vl.at(3, c) = 1e6f;
    in.vg.at(3, c) = 1e6f;
  }
  Tensor out = run_op(in, 8, 1);
  for (size_t i = 0; i < 3; ++i)
    for (size_t c = 0; c < 2; ++c) CHECK(std::abs(out.at(i, c)) < 100.0f);
}

TEST_CASE("outputs are insensitive to values outside the receptive field") {
  // W = 2 means each query sees only immediate neighbors. With no globals,
  // changing the value at a distance > 1 cannot move the output.
  auto in = random_inputs(8, 4, 7);
  Tensor base = run_op(in, 2, 2);
  auto modified = in;
  for (size_t c = 0; c < 4; ++c) {
    modified.vl.at(6, c) += 100.0f;
    modified.kl.at(6, c) += 1.0f;
    modified.vg.at(6, c) += 100.0f;
  }
  Tensor out = run_op(modified, 2, 2);
  for (size_t i = 0; i < 4; ++i)
    for (size_t c = 0; c < 4; ++c) CHECK(out.at(i, c) == base.at(i, c));
  // The neighbor at distance 1 does move.
  bool neighbor_moved = false;
  for (size_t c = 0; c < 4; ++c)
    if (out.at(5, c) != base.at(5, c)) neighbor_moved = true;
  CHECK(neighbor_moved);
}

TEST_CASE("a global position reaches every query") {
  auto in = random_inputs(8, 4, 8);
  in.global[7] = 1;
  Tensor base = run_op(in, 2, 2);
  auto modified = in;
  for (size_t c = 0; c < 4; ++c) modified.vg.at(7, c) += 10.0f;
  Tensor out = run_op(modified, 2, 2);
  // Even position 0, far outside the window, sees the change.
  bool moved = false;
  for (size_t c = 0; c < 4; ++c)
    if (out.at(0, c) != base.at(0, c)) moved = true;
  CHECK(moved);
}

TEST_CASE("pairs involving a global position use the global projections") {
  auto in = random_inputs(4, 2, 9);
  in.global = {1, 0, 0, 0};
  // Zero all global values: rows attending through global pairs see zeros.
  in.vg = Tensor::zeros(4, 2);
  Tensor out = run_op(in, 8, 1);
  // Query 0 is global, so every pair (0, j) is global and its output is 0.
  for (size_t c = 0; c < 2; ++c) CHECK(out.at(0, c) == 0.0f);
}

TEST_CASE("odd windows and shape mismatches are rejected") {
  auto in = random_inputs(4, 4, 10);
  Tape t;
  auto node = [&](const Tensor& x) { return t.constant(x); };
  CHECK_THROWS_AS(ops::window_attention(t, node(in.ql), node(in.kl), node(in.vl), node(in.qg),
                                        node(in.kg), node(in.vg), in.mask, in.global, 3, 2),
                  ContractError);
  CHECK_THROWS_AS(ops::window_attention(t, node(in.ql), node(in.kl), node(in.vl), node(in.qg),
                                        node(in.kg), node(in.vg), in.mask, in.global, 2, 3),
                  ContractError);
  std::vector<uint8_t> short_mask(3, 1);
  CHECK_THROWS_AS(ops::window_attention(t, node(in.ql), node(in.kl), node(in.vl), node(in.qg),
                                        node(in.kg), node(in.vg), short_mask, in.global, 2, 2),
                  ContractError);
}

TEST_CASE("attention gradients match finite differences") {
  auto in = random_inputs(5, 4, 11, 0.0, 0.0);
  in.global = {1, 0, 0, 0, 1};
  in.mask = {1, 1, 1, 1, 1};
  const uint32_t window = 2, heads = 2;

  std::mt19937 wrng(55);
  Tensor weights = Tensor::randn(5, 4, wrng, 1.0f);
  std::vector<Tensor*> tensors = {&in.ql, &in.kl, &in.vl, &in.qg, &in.kg, &in.vg};

  auto loss = [&]() {
    Tensor out = run_op(in, window, heads);
    double acc = 0;
    for (size_t i = 0; i < out.data.size(); ++i)
      acc += double(out.data[i]) * weights.data[i];
    return acc;
  };

  std::vector<Tensor> grads;
  for (auto* p : tensors) grads.push_back(Tensor::zeros(p->rows, p->cols));
  {
    Tape t;
    std::vector<NodeId> ids;
    for (size_t i = 0; i < tensors.size(); ++i) ids.push_back(t.leaf(tensors[i], &grads[i]));
    NodeId out = ops::window_attention(t, ids[0], ids[1], ids[2], ids[3], ids[4], ids[5],
                                       in.mask, in.global, window, heads);
    const Tensor& o = t.val(out);
    Tensor scalar(1, 1);
    for (size_t i = 0; i < o.data.size(); ++i) scalar.data[0] += o.data[i] * weights.data[i];
    NodeId root = t.add_op(std::move(scalar), [out, weights](Tape& tp, NodeId self) {
      float g = tp.grad(self).data[0];
      Tensor& go = tp.grad(out);
      for (size_t i = 0; i < go.data.size(); ++i) go.data[i] += g * weights.data[i];
    });
    t.backward(root);
  }

  const float eps = 1e-3f;
  for (size_t ti = 0; ti < tensors.size(); ++ti) {
    double num = 0, den = 0;
    for (size_t k = 0; k < tensors[ti]->data.size(); ++k) {
      float saved = tensors[ti]->data[k];
      tensors[ti]->data[k] = saved + eps;
      double up = loss();
      tensors[ti]->data[k] = saved - eps;
      double down = loss();
      tensors[ti]->data[k] = saved;
      double fd = (up - down) / (2.0 * eps);
      double an = grads[ti].data[k];
      num += (fd - an) * (fd - an);
      den += fd * fd + an * an;
    }
    double rel = std::sqrt(num) / (std::sqrt(den) + 1e-12);
    INFO("tensor " << ti);
    CHECK(rel < 2e-2);
  }
}

TEST_CASE("tied projections accumulate both gradient paths") {
  // Passing the same node for local and global projections must not break
  // backward; the op just adds both contributions.
  auto in = random_inputs(4, 2, 12);
  in.global = {1, 0, 0, 0};
  Tensor grad_q = Tensor::zeros(4, 2), grad_k = Tensor::zeros(4, 2),
         grad_v = Tensor::zeros(4, 2);
  Tape t;
  NodeId q = t.leaf(&in.ql, &grad_q);
  NodeId k = t.leaf(&in.kl, &grad_k);
  NodeId v = t.leaf(&in.vl, &grad_v);
  NodeId out = ops::window_attention(t, q, k, v, q, k, v, in.mask, in.global, 2, 1);
  const Tensor& o = t.val(out);
  Tensor scalar(1, 1);
  for (float x : o.data) scalar.data[0] += x;
  NodeId root = t.add_op(std::move(scalar), [out](Tape& tp, NodeId self) {
    float g = tp.grad(self).data[0];
    for (float& x : tp.grad(out).data) x += g;
  });
  t.backward(root);
  double total = 0;
  for (float x : grad_v.data) total += std::abs(x);
  CHECK(total > 0.0);
}
