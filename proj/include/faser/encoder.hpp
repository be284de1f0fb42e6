#pragma once

// The embedding model: token + position embeddings, pre-norm blocks of
// windowed attention and GELU feed-forward sublayers, CLS pooling, and a
// two-dense-layer head projecting onto the unit sphere of dimension E.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "faser/attention.hpp"
#include "faser/autograd.hpp"
#include "faser/tensor.hpp"
#include "faser/vocab.hpp"

namespace faser {

struct EncoderConfig {
  uint32_t input_len = 128;        // L
  uint32_t num_blocks = 2;         // B
  uint32_t hidden_dim = 64;        // H
  uint32_t num_heads = 2;          // A
  uint32_t intermediate_dim = 128; // F
  uint32_t window = 16;            // W, total span: i attends |i-j| <= W/2
  uint32_t embed_dim = 32;         // E
  uint32_t vocab_size = 0;         // V, set from the vocabulary
  float dropout = 0.1f;
  bool tie_global = false;         // alias global projections onto local ones

  void validate() const {
    if (input_len < 1 || num_blocks < 1 || hidden_dim < 1 || num_heads < 1 ||
        intermediate_dim < 1 || window < 1 || embed_dim < 1)
      throw ContractError("encoder config: all dimensions must be >= 1");
    if (hidden_dim % num_heads != 0)
      throw ContractError("encoder config: hidden_dim must be divisible by num_heads");
    if (window % 2 != 0) throw ContractError("encoder config: window must be even");
    if (window > input_len) throw ContractError("encoder config: window must be <= input_len");
    if (vocab_size < 3) throw ContractError("encoder config: vocab_size must cover reserved ids");
    if (dropout < 0.0f || dropout >= 1.0f)
      throw ContractError("encoder config: dropout must be in [0, 1)");
  }

  static EncoderConfig desk_scale() { return {}; }

  // Full-scale preset; hidden 768 with 12 heads per the reference
  // long-document architecture.
  static EncoderConfig full_scale() {
    EncoderConfig c;
    c.input_len = 4096;
    c.num_blocks = 8;
    c.hidden_dim = 768;
    c.num_heads = 12;
    c.intermediate_dim = 2048;
    c.window = 512;
    c.embed_dim = 128;
    return c;
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct Parameters {
  struct Block {
    Tensor ln1_gain, ln1_bias;
    Tensor q_local_w, q_local_b, k_local_w, k_local_b, v_local_w, v_local_b;
    Tensor q_global_w, q_global_b, k_global_w, k_global_b, v_global_w, v_global_b;
    Tensor out_w, out_b;
    Tensor ln2_gain, ln2_bias;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;

    bool operator==(const Block&) const = default;
  };

  Tensor token_embedding;     // V×H
  Tensor position_embedding;  // L×H
  std::vector<Block> blocks;
  Tensor head1_w, head1_b;  // H×H, 1×H
  Tensor head2_w, head2_b;  // H×E, 1×E

  bool operator==(const Parameters&) const = default;

  // Fixed-order iteration over (name, tensor); the order defines checkpoint
  // layout and optimizer state alignment.
  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("token_embedding", self.token_embedding);
    f("position_embedding", self.position_embedding);
    for (size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string p = "block" + std::to_string(i) + ".";
      f(p + "ln1.gain", b.ln1_gain);
      f(p + "ln1.bias", b.ln1_bias);
      f(p + "attn.q_local.weight", b.q_local_w);
      f(p + "attn.q_local.bias", b.q_local_b);
      f(p + "attn.k_local.weight", b.k_local_w);
      f(p + "attn.k_local.bias", b.k_local_b);
      f(p + "attn.v_local.weight", b.v_local_w);
      f(p + "attn.v_local.bias", b.v_local_b);
      f(p + "attn.q_global.weight", b.q_global_w);
      f(p + "attn.q_global.bias", b.q_global_b);
      f(p + "attn.k_global.weight", b.k_global_w);
      f(p + "attn.k_global.bias", b.k_global_b);
      f(p + "attn.v_global.weight", b.v_global_w);
      f(p + "attn.v_global.bias", b.v_global_b);
      f(p + "attn.out.weight", b.out_w);
      f(p + "attn.out.bias", b.out_b);
      f(p + "ln2.gain", b.ln2_gain);
      f(p + "ln2.bias", b.ln2_bias);
      f(p + "ffn.fc1.weight", b.fc1_w);
      f(p + "ffn.fc1.bias", b.fc1_b);
      f(p + "ffn.fc2.weight", b.fc2_w);
      f(p + "ffn.fc2.bias", b.fc2_b);
    }
    f("head.fc1.weight", self.head1_w);
    f("head.fc1.bias", self.head1_b);
    f("head.fc2.weight", self.head2_w);
    f("head.fc2.bias", self.head2_b);
  }

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, std::forward<F>(f));
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, std::forward<F>(f));
  }

  size_t tensor_count() const {
    size_t n = 0;
    visit([&n](const std::string&, const Tensor&) { ++n; });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&ok](const std::string&, const Tensor& t) {
      for (float v : t.data)
        if (!std::isfinite(v)) ok = false;
    });
    return ok;
  }

  static Parameters shaped(const EncoderConfig& cfg) {
    cfg.validate();
    const size_t H = cfg.hidden_dim, F = cfg.intermediate_dim, E = cfg.embed_dim;
    Parameters p;
    p.token_embedding = Tensor::zeros(cfg.vocab_size, H);
    p.position_embedding = Tensor::zeros(cfg.input_len, H);
    p.blocks.resize(cfg.num_blocks);
    for (auto& b : p.blocks) {
      b.ln1_gain = Tensor::zeros(1, H);
      b.ln1_bias = Tensor::zeros(1, H);
      for (Tensor* w : {&b.q_local_w, &b.k_local_w, &b.v_local_w, &b.q_global_w, &b.k_global_w,
                        &b.v_global_w, &b.out_w})
        *w = Tensor::zeros(H, H);
      for (Tensor* bias : {&b.q_local_b, &b.k_local_b, &b.v_local_b, &b.q_global_b,
                           &b.k_global_b, &b.v_global_b, &b.out_b})
        *bias = Tensor::zeros(1, H);
      b.ln2_gain = Tensor::zeros(1, H);
      b.ln2_bias = Tensor::zeros(1, H);
      b.fc1_w = Tensor::zeros(H, F);
      b.fc1_b = Tensor::zeros(1, F);
      b.fc2_w = Tensor::zeros(F, H);
      b.fc2_b = Tensor::zeros(1, H);
    }
    p.head1_w = Tensor::zeros(H, H);
    p.head1_b = Tensor::zeros(1, H);
    p.head2_w = Tensor::zeros(H, E);
    p.head2_b = Tensor::zeros(1, E);
    return p;
  }

  static Parameters zeros_like(const EncoderConfig& cfg) { return shaped(cfg); }

  // Embeddings N(0, 0.02); weight matrices Xavier, N(0, sqrt(2/(fan_in +
  // fan_out))), so activations stay O(1) at every width; biases zero,
  // layer-norm gains one. Fill order follows visit order so identical seeds
  // give identical parameters.
  static Parameters init(const EncoderConfig& cfg, uint64_t seed) {
    Parameters p = shaped(cfg);
    std::mt19937 rng(static_cast<uint32_t>(seed ^ (seed >> 32)));
    p.visit([&](const std::string& name, Tensor& t) {
      if (name.ends_with(".gain")) {
        t.fill(1.0f);
      } else if (name.ends_with(".bias")) {
        t.fill(0.0f);
      } else {
        float stddev = name.ends_with("_embedding")
                           ? 0.02f
                           : std::sqrt(2.0f / static_cast<float>(t.rows + t.cols));
        std::normal_distribution<float> dist(0.0f, stddev);
        for (float& v : t.data) v = dist(rng);
      }
    });
    return p;
  }
};

// Node ids of every parameter leaf on one tape.
struct ParamNodes {
  struct Block {
    NodeId ln1_gain, ln1_bias;
    NodeId q_local_w, q_local_b, k_local_w, k_local_b, v_local_w, v_local_b;
    NodeId q_global_w, q_global_b, k_global_w, k_global_b, v_global_w, v_global_b;
    NodeId out_w, out_b;
    NodeId ln2_gain, ln2_bias;
    NodeId fc1_w, fc1_b, fc2_w, fc2_b;
  };
  std::vector<Block> blocks;
  NodeId token_embedding, position_embedding;
  NodeId head1_w, head1_b, head2_w, head2_b;
};

// Registers every parameter as a tape leaf. `grads` may be null (inference:
// backward must not be called on the resulting tape).
inline ParamNodes bind_parameters(Tape& t, const Parameters& p, Parameters* grads) {
  ParamNodes n;
  auto leaf = [&](const Tensor& v, Tensor* g) { return t.leaf(&v, g); };
  n.token_embedding = leaf(p.token_embedding, grads ? &grads->token_embedding : nullptr);
  n.position_embedding =
      leaf(p.position_embedding, grads ? &grads->position_embedding : nullptr);
  n.blocks.resize(p.blocks.size());
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    auto* gb = grads ? &grads->blocks[i] : nullptr;
    auto& nb = n.blocks[i];
    nb.ln1_gain = leaf(b.ln1_gain, gb ? &gb->ln1_gain : nullptr);
    nb.ln1_bias = leaf(b.ln1_bias, gb ? &gb->ln1_bias : nullptr);
    nb.q_local_w = leaf(b.q_local_w, gb ? &gb->q_local_w : nullptr);
    nb.q_local_b = leaf(b.q_local_b, gb ? &gb->q_local_b : nullptr);
    nb.k_local_w = leaf(b.k_local_w, gb ? &gb->k_local_w : nullptr);
    nb.k_local_b = leaf(b.k_local_b, gb ? &gb->k_local_b : nullptr);
    nb.v_local_w = leaf(b.v_local_w, gb ? &gb->v_local_w : nullptr);
    nb.v_local_b = leaf(b.v_local_b, gb ? &gb->v_local_b : nullptr);
    nb.q_global_w = leaf(b.q_global_w, gb ? &gb->q_global_w : nullptr);
    nb.q_global_b = leaf(b.q_global_b, gb ? &gb->q_global_b : nullptr);
    nb.k_global_w = leaf(b.k_global_w, gb ? &gb->k_global_w : nullptr);
    nb.k_global_b = leaf(b.k_global_b, gb ? &gb->k_global_b : nullptr);
    nb.v_global_w = leaf(b.v_global_w, gb ? &gb->v_global_w : nullptr);
    nb.v_global_b = leaf(b.v_global_b, gb ? &gb->v_global_b : nullptr);
    nb.out_w = leaf(b.out_w, gb ? &gb->out_w : nullptr);
    nb.out_b = leaf(b.out_b, gb ? &gb->out_b : nullptr);
    nb.ln2_gain = leaf(b.ln2_gain, gb ? &gb->ln2_gain : nullptr);
    nb.ln2_bias = leaf(b.ln2_bias, gb ? &gb->ln2_bias : nullptr);
    nb.fc1_w = leaf(b.fc1_w, gb ? &gb->fc1_w : nullptr);
    nb.fc1_b = leaf(b.fc1_b, gb ? &gb->fc1_b : nullptr);
    nb.fc2_w = leaf(b.fc2_w, gb ? &gb->fc2_w : nullptr);
    nb.fc2_b = leaf(b.fc2_b, gb ? &gb->fc2_b : nullptr);
  }
  n.head1_w = leaf(p.head1_w, grads ? &grads->head1_w : nullptr);
  n.head1_b = leaf(p.head1_b, grads ? &grads->head1_b : nullptr);
  n.head2_w = leaf(p.head2_w, grads ? &grads->head2_w : nullptr);
  n.head2_b = leaf(p.head2_b, grads ? &grads->head2_b : nullptr);
  return n;
}

// Runs one sequence through the block stack and returns the CLS row (1×H).
inline NodeId encode_sequence(Tape& t, const ParamNodes& pn, const EncoderConfig& cfg,
                              const EncodedFunction& enc, bool training, std::mt19937& rng) {
  if (enc.ids.size() != cfg.input_len)
    throw ContractError("encoded function length does not match model input length");
  std::vector<int32_t> pos_ids(cfg.input_len);
  std::iota(pos_ids.begin(), pos_ids.end(), 0);
  NodeId tok = ops::gather_rows(t, pn.token_embedding, enc.ids);
  NodeId pos = ops::gather_rows(t, pn.position_embedding, pos_ids);
  NodeId x = ops::add(t, tok, pos);
  x = ops::dropout(t, x, cfg.dropout, rng, training);
  for (const auto& b : pn.blocks) {
    NodeId a = ops::layer_norm(t, x, b.ln1_gain, b.ln1_bias);
    NodeId ql = ops::linear(t, a, b.q_local_w, b.q_local_b);
    NodeId kl = ops::linear(t, a, b.k_local_w, b.k_local_b);
    NodeId vl = ops::linear(t, a, b.v_local_w, b.v_local_b);
    NodeId qg = ql, kg = kl, vg = vl;
    if (!cfg.tie_global) {
      qg = ops::linear(t, a, b.q_global_w, b.q_global_b);
      kg = ops::linear(t, a, b.k_global_w, b.k_global_b);
      vg = ops::linear(t, a, b.v_global_w, b.v_global_b);
    }
    NodeId att = ops::window_attention(t, ql, kl, vl, qg, kg, vg, enc.attention_mask,
                                       enc.global_mask, cfg.window, cfg.num_heads);
    att = ops::linear(t, att, b.out_w, b.out_b);
    att = ops::dropout(t, att, cfg.dropout, rng, training);
    x = ops::add(t, x, att);
    NodeId f = ops::layer_norm(t, x, b.ln2_gain, b.ln2_bias);
    NodeId h = ops::linear(t, f, b.fc1_w, b.fc1_b);
    h = ops::gelu(t, h);
    h = ops::linear(t, h, b.fc2_w, b.fc2_b);
    h = ops::dropout(t, h, cfg.dropout, rng, training);
    x = ops::add(t, x, h);
  }
  return ops::take_row(t, x, 0);
}

// Projects a stack of CLS rows through the head; rows come out unit-norm.
inline NodeId project_head(Tape& t, const ParamNodes& pn, const std::vector<NodeId>& cls_rows) {
  NodeId m = ops::stack_rows(t, cls_rows);
  NodeId h = ops::linear(t, m, pn.head1_w, pn.head1_b);
  h = ops::gelu(t, h);
  NodeId e = ops::linear(t, h, pn.head2_w, pn.head2_b);
  return ops::l2_normalize_rows(t, e);
}

// Full forward for a batch: returns the n×E unit-norm embedding matrix node.
inline NodeId forward_batch(Tape& t, const ParamNodes& pn, const EncoderConfig& cfg,
                            const std::vector<EncodedFunction>& batch, bool training,
                            std::mt19937& rng) {
  if (batch.empty()) throw ContractError("forward_batch: empty batch");
  std::vector<NodeId> cls;
  cls.reserve(batch.size());
  for (const auto& enc : batch) cls.push_back(encode_sequence(t, pn, cfg, enc, training, rng));
  return project_head(t, pn, cls);
}

// Inference facade. Owns config + parameters; forward passes are pure, so one
// Encoder can serve many threads.
class Encoder {
 public:
  Encoder(EncoderConfig cfg, Parameters params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
  }

  const EncoderConfig& config() const { return cfg_; }
  const Parameters& parameters() const { return params_; }
  Parameters& parameters() { return params_; }

  // n×E matrix of unit-norm embeddings, one row per input.
  Tensor embed_batch(const std::vector<EncodedFunction>& batch) const {
    Tape t;
    ParamNodes pn = bind_parameters(t, params_, nullptr);
    std::mt19937 rng(0);  // dropout disabled, rng unused
    NodeId out = forward_batch(t, pn, cfg_, batch, false, rng);
    return t.val(out);
  }

  std::vector<float> embed(const EncodedFunction& enc) const {
    Tensor m = embed_batch({enc});
    return std::vector<float>(m.row(0), m.row(0) + m.cols);
  }

 private:
  EncoderConfig cfg_;
  Parameters params_;
};

inline float cosine_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) throw ContractError("cosine_similarity: dimension mismatch");
  double dot = 0;
  for (size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * b[i];
  return static_cast<float>(dot);
}

}  // namespace faser
