#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "faser/sampler.hpp"

using namespace faser;

namespace {

std::vector<std::string> label_pool(size_t labels, size_t members) {
  std::vector<std::string> out;
  for (size_t l = 0; l < labels; ++l)
    for (size_t m = 0; m < members; ++m) out.push_back("L" + std::to_string(l));
  return out;
}

}  // namespace

TEST_CASE("every batch holds m members each of distinct labels") {
  auto labels = label_pool(10, 4);
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 8;
  cfg.functions_per_epoch = 40;
  cfg.seed = 3;
  BatchSampler sampler(labels, cfg);
  CHECK(sampler.label_count() == 10);
  CHECK(sampler.batches_per_epoch() == 5);
  for (int epoch = 0; epoch < 3; ++epoch) {
    auto batches = sampler.next_epoch();
    REQUIRE(batches.size() == 5);
    for (const auto& batch : batches) {
      REQUIRE(batch.size() == 8);
      std::map<std::string, size_t> counts;
      std::set<size_t> distinct(batch.begin(), batch.end());
      CHECK(distinct.size() == 8);  // no repeated record
      for (size_t idx : batch) counts[labels[idx]]++;
      CHECK(counts.size() == 4);  // batch_size / m labels
      for (const auto& [label, n] : counts) CHECK(n == 2);
    }
  }
}

TEST_CASE("members within a batch are distinct records even for small classes") {
  auto labels = label_pool(4, 2);
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 4;
  cfg.functions_per_epoch = 8;
  cfg.seed = 1;
  BatchSampler sampler(labels, cfg);
  for (int epoch = 0; epoch < 4; ++epoch)
    for (const auto& batch : sampler.next_epoch()) {
      std::set<size_t> distinct(batch.begin(), batch.end());
      CHECK(distinct.size() == batch.size());
    }
}

TEST_CASE("sampling is deterministic in the seed") {
  auto labels = label_pool(8, 3);
  SamplerConfig cfg;
  cfg.m = 3;
  cfg.batch_size = 6;
  cfg.functions_per_epoch = 24;
  cfg.seed = 9;
  BatchSampler a(labels, cfg);
  BatchSampler b(labels, cfg);
  CHECK(a.next_epoch() == b.next_epoch());
  CHECK(a.next_epoch() == b.next_epoch());
  cfg.seed = 10;
  BatchSampler c(labels, cfg);
  CHECK(a.next_epoch() != c.next_epoch());
}

TEST_CASE("label pool refills so later epochs still cover all labels") {
  auto labels = label_pool(5, 2);
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 4;
  cfg.functions_per_epoch = 20;  // 5 batches of 2 labels per epoch
  cfg.seed = 4;
  BatchSampler sampler(labels, cfg);
  std::set<std::string> seen;
  for (int epoch = 0; epoch < 4; ++epoch)
    for (const auto& batch : sampler.next_epoch())
      for (size_t idx : batch) seen.insert(labels[idx]);
  CHECK(seen.size() == 5);
}

TEST_CASE("undersized classes are rejected with the label named") {
  std::vector<std::string> labels = {"big", "big", "big", "tiny"};
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 4;
  cfg.functions_per_epoch = 4;
  try {
    BatchSampler sampler(labels, cfg);
    FAIL("expected error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("tiny") != std::string::npos);
  }
}

TEST_CASE("too few labels for one batch is an error") {
  auto labels = label_pool(2, 4);
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 8;  // needs 4 labels
  cfg.functions_per_epoch = 8;
  CHECK_THROWS_AS(BatchSampler(labels, cfg), ContractError);
}

TEST_CASE("config invariants are validated") {
  SamplerConfig cfg;
  cfg.m = 1;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = {};
  cfg.m = 3;
  cfg.batch_size = 8;  // not divisible by m
  cfg.functions_per_epoch = 8;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = {};
  cfg.m = 2;
  cfg.batch_size = 8;
  cfg.functions_per_epoch = 4;  // less than one batch
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("epoch truncates to whole batches") {
  auto labels = label_pool(6, 3);
  SamplerConfig cfg;
  cfg.m = 2;
  cfg.batch_size = 4;
  cfg.functions_per_epoch = 18;  // 4.5 batches floor to 4
  cfg.seed = 2;
  BatchSampler sampler(labels, cfg);
  CHECK(sampler.batches_per_epoch() == 4);
  CHECK(sampler.next_epoch().size() == 4);
}
