#pragma once

// m-per-class batch sampling: every batch holds batch_size/m labels with m
// distinct examples each, so every anchor has an in-batch positive. Labels
// are drawn from a shuffled pool without replacement; the pool reshuffles
// when it runs out. One epoch emits floor(functions_per_epoch / batch_size)
// batches. Fully deterministic given the seed.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "faser/types.hpp"

namespace faser {

struct SamplerConfig {
  uint32_t m = 2;
  uint32_t batch_size = 8;
  uint32_t functions_per_epoch = 0;
  uint64_t seed = 0;

  void validate() const {
    if (m < 2) throw ContractError("sampler: m must be >= 2");
    if (batch_size == 0 || batch_size % m != 0)
      throw ContractError("sampler: batch_size must be a positive multiple of m");
    if (functions_per_epoch < batch_size)
      throw ContractError("sampler: functions_per_epoch must be >= batch_size");
  }
};

class BatchSampler {
 public:
  // `record_labels[i]` is the label of corpus record i; batches refer to
  // records by these indices.
  BatchSampler(const std::vector<std::string>& record_labels, const SamplerConfig& cfg)
      : cfg_(cfg), rng_(static_cast<uint32_t>(cfg.seed ^ (cfg.seed >> 32))) {
    cfg_.validate();
    std::unordered_map<std::string, size_t> label_ix;
    for (size_t i = 0; i < record_labels.size(); ++i) {
      auto [it, fresh] = label_ix.try_emplace(record_labels[i], members_.size());
      if (fresh) {
        label_names_.push_back(record_labels[i]);
        members_.emplace_back();
      }
      members_[it->second].push_back(i);
    }
    for (size_t l = 0; l < members_.size(); ++l)
      if (members_[l].size() < cfg_.m)
        throw ContractError("sampler: label \"" + label_names_[l] + "\" has " +
                            std::to_string(members_[l].size()) + " examples, needs >= " +
                            std::to_string(cfg_.m));
    const size_t labels_per_batch = cfg_.batch_size / cfg_.m;
    if (members_.size() < labels_per_batch)
      throw ContractError("sampler: corpus has " + std::to_string(members_.size()) +
                          " labels, a batch needs " + std::to_string(labels_per_batch));
  }

  size_t label_count() const { return members_.size(); }
  size_t batches_per_epoch() const { return cfg_.functions_per_epoch / cfg_.batch_size; }

  // Record indices, label-major: m members of the first label, then the next.
  std::vector<std::vector<size_t>> next_epoch() {
    std::vector<std::vector<size_t>> batches;
    const size_t labels_per_batch = cfg_.batch_size / cfg_.m;
    batches.reserve(batches_per_epoch());
    for (size_t b = 0; b < batches_per_epoch(); ++b) {
      std::vector<size_t> batch;
      batch.reserve(cfg_.batch_size);
      std::vector<size_t> chosen;
      chosen.reserve(labels_per_batch);
      while (chosen.size() < labels_per_batch) chosen.push_back(draw_label(chosen));
      for (size_t l : chosen) pick_members(l, batch);
      batches.push_back(std::move(batch));
    }
    return batches;
  }

 private:
  // First pool entry not already in this batch; refills (reshuffles) the pool
  // when it runs dry. Skipped entries stay available for later batches.
  size_t draw_label(const std::vector<size_t>& in_batch) {
    for (int attempt = 0; attempt < 2; ++attempt) {
      for (size_t pos = 0; pos < pool_.size(); ++pos) {
        size_t l = pool_[pos];
        if (std::find(in_batch.begin(), in_batch.end(), l) == in_batch.end()) {
          pool_.erase(pool_.begin() + static_cast<ptrdiff_t>(pos));
          return l;
        }
      }
      refill_pool();
    }
    throw ContractError("sampler: cannot fill a batch with distinct labels");
  }

  void refill_pool() {
    std::vector<size_t> fresh(members_.size());
    for (size_t i = 0; i < fresh.size(); ++i) fresh[i] = i;
    std::shuffle(fresh.begin(), fresh.end(), rng_);
    pool_.insert(pool_.end(), fresh.begin(), fresh.end());
  }

  void pick_members(size_t label, std::vector<size_t>& batch) {
    std::vector<size_t> tmp = members_[label];
    for (uint32_t i = 0; i < cfg_.m; ++i) {
      std::uniform_int_distribution<size_t> dist(i, tmp.size() - 1);
      std::swap(tmp[i], tmp[dist(rng_)]);
      batch.push_back(tmp[i]);
    }
  }

  SamplerConfig cfg_;
  std::mt19937 rng_;
  std::vector<std::string> label_names_;
  std::vector<std::vector<size_t>> members_;
  std::vector<size_t> pool_;
};

}  // namespace faser
