#pragma once

// Metric-learning training loop: sample m-per-class batches, embed, mine
// hardest pairs, Circle Loss, Adam with gradient accumulation.
//
// Each micro-batch backpropagates loss/accumulation_steps into a persistent
// gradient accumulator; Adam applies and clears it every accumulation_steps
// micro-batches. Accumulation may straddle epoch boundaries. No weight decay,
// no learning-rate schedule.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "faser/encoder.hpp"
#include "faser/loss.hpp"
#include "faser/sampler.hpp"
#include "faser/vocab.hpp"

namespace faser {

struct OptimizerConfig {
  float learning_rate = 5e-4f;
  uint32_t accumulation_steps = 1;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;

  void validate() const {
    if (!(learning_rate > 0.0f)) throw ContractError("optimizer: learning_rate must be > 0");
    if (accumulation_steps < 1) throw ContractError("optimizer: accumulation_steps must be >= 1");
    if (!(beta1 >= 0.0f && beta1 < 1.0f && beta2 >= 0.0f && beta2 < 1.0f))
      throw ContractError("optimizer: betas must be in [0, 1)");
    if (!(eps > 0.0f)) throw ContractError("optimizer: eps must be > 0");
  }
};

struct AdamState {
  Parameters m;  // first moments
  Parameters v;  // second moments
  uint64_t step = 0;

  static AdamState init(const EncoderConfig& cfg) {
    return {Parameters::zeros_like(cfg), Parameters::zeros_like(cfg), 0};
  }
};

namespace detail {

inline std::vector<Tensor*> tensor_list(Parameters& p) {
  std::vector<Tensor*> out;
  p.visit([&out](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

}  // namespace detail

// One Adam update from the accumulated gradients; clears them afterwards.
inline void adam_step(Parameters& params, Parameters& grads, AdamState& st,
                      const OptimizerConfig& oc) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(double(oc.beta1), double(st.step));
  const double bc2 = 1.0 - std::pow(double(oc.beta2), double(st.step));
  auto tp = detail::tensor_list(params);
  auto tg = detail::tensor_list(grads);
  auto tm = detail::tensor_list(st.m);
  auto tv = detail::tensor_list(st.v);
  for (size_t k = 0; k < tp.size(); ++k) {
    float* p = tp[k]->data.data();
    float* g = tg[k]->data.data();
    float* m = tm[k]->data.data();
    float* v = tv[k]->data.data();
    const size_t n = tp[k]->size();
    for (size_t i = 0; i < n; ++i) {
      m[i] = oc.beta1 * m[i] + (1.0f - oc.beta1) * g[i];
      v[i] = oc.beta2 * v[i] + (1.0f - oc.beta2) * g[i] * g[i];
      float mhat = static_cast<float>(m[i] / bc1);
      float vhat = static_cast<float>(v[i] / bc2);
      p[i] -= oc.learning_rate * mhat / (std::sqrt(vhat) + oc.eps);
      g[i] = 0.0f;
    }
  }
}

struct TrainConfig {
  SamplerConfig sampler;
  CircleLossConfig loss;
  OptimizerConfig optimizer;
  uint32_t epochs = 1;
  uint64_t seed = 0;
  bool all_pairs = false;  // all-pairs Circle Loss instead of mined-hardest
  uint32_t save_every = 0; // extra checkpoint every N optimizer steps; 0 = off
};

struct StepLog {
  uint64_t step = 0;      // optimizer step count (after accumulation)
  uint64_t micro_step = 0;
  uint32_t epoch = 0;
  double loss = 0;        // unscaled micro-batch loss
  float lr = 0;
};

class Trainer {
 public:
  using StepCallback = std::function<void(const StepLog&)>;
  // Called after every completed optimizer step that hits save_every, and
  // once per epoch end.
  using CheckpointCallback = std::function<void(uint64_t step, uint32_t epoch)>;

  Trainer(EncoderConfig cfg, Parameters params, TrainConfig tc)
      : cfg_(cfg), params_(std::move(params)), tc_(tc), grads_(Parameters::zeros_like(cfg)),
        adam_(AdamState::init(cfg)),
        dropout_rng_(static_cast<uint32_t>(tc.seed ^ 0x9e3779b9u)) {
    cfg_.validate();
    tc_.sampler.validate();
    tc_.loss.validate();
    tc_.optimizer.validate();
  }

  const Parameters& parameters() const { return params_; }
  const EncoderConfig& config() const { return cfg_; }
  uint64_t optimizer_steps() const { return adam_.step; }

  // Returns the mean micro-batch loss of the epoch.
  double train_epoch(const std::vector<EncodedFunction>& corpus, BatchSampler& sampler,
                     uint32_t epoch, const StepCallback& on_step = {},
                     const CheckpointCallback& on_checkpoint = {}) {
    auto batches = sampler.next_epoch();
    double loss_sum = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      std::vector<EncodedFunction> batch;
      std::vector<std::string> labels;
      batch.reserve(batches[b].size());
      for (size_t ix : batches[b]) {
        batch.push_back(corpus[ix]);
        labels.push_back(corpus[ix].label);
      }
      double loss = micro_step(batch, labels);
      if (!std::isfinite(loss))
        throw ContractError("non-finite loss at micro-batch " + std::to_string(b) +
                            " of epoch " + std::to_string(epoch));
      loss_sum += loss;
      ++micro_steps_;
      if (micro_steps_ % tc_.optimizer.accumulation_steps == 0) {
        if (!grads_.all_finite())
          throw ContractError("non-finite gradient at micro-batch " + std::to_string(b) +
                              " of epoch " + std::to_string(epoch));
        adam_step(params_, grads_, adam_, tc_.optimizer);
        if (on_checkpoint && tc_.save_every > 0 && adam_.step % tc_.save_every == 0)
          on_checkpoint(adam_.step, epoch);
      }
      if (on_step)
        on_step({adam_.step, micro_steps_, epoch, loss, tc_.optimizer.learning_rate});
    }
    if (on_checkpoint) on_checkpoint(adam_.step, epoch);
    return batches.empty() ? 0.0 : loss_sum / double(batches.size());
  }

 private:
  double micro_step(const std::vector<EncodedFunction>& batch,
                    const std::vector<std::string>& labels) {
    Tape tape;
    ParamNodes pn = bind_parameters(tape, params_, &grads_);
    NodeId emb = forward_batch(tape, pn, cfg_, batch, true, dropout_rng_);
    NodeId sim = ops::matmul_nt(tape, emb, emb);
    NodeId loss = tc_.all_pairs ? circle_loss_all_pairs_node(tape, sim, labels, tc_.loss)
                                : circle_loss_node(tape, sim, labels, tc_.loss);
    tape.backward(loss, 1.0f / static_cast<float>(tc_.optimizer.accumulation_steps));
    return tape.val(loss).data[0];
  }

  EncoderConfig cfg_;
  Parameters params_;
  TrainConfig tc_;
  Parameters grads_;
  AdamState adam_;
  std::mt19937 dropout_rng_;
  uint64_t micro_steps_ = 0;
};

}  // namespace faser
