#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "faser/encoder.hpp"
#include "support/helpers.hpp"

using namespace faser;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.input_len = 10;
  cfg.num_blocks = 2;
  cfg.hidden_dim = 8;
  cfg.num_heads = 2;
  cfg.intermediate_dim = 12;
  cfg.window = 4;
  cfg.embed_dim = 6;
  cfg.vocab_size = 16;
  cfg.dropout = 0.0f;
  return cfg;
}

EncodedFunction random_encoded(const EncoderConfig& cfg, uint32_t seed, size_t true_len = 0) {
  std::mt19937 rng(seed);
  EncodedFunction enc;
  enc.label = "f" + std::to_string(seed);
  size_t len = true_len ? true_len : 2 + rng() % (cfg.input_len - 2);
  enc.ids.assign(cfg.input_len, 0);
  enc.attention_mask.assign(cfg.input_len, 0);
  enc.global_mask.assign(cfg.input_len, 0);
  enc.ids[0] = 2;
  enc.attention_mask[0] = 1;
  enc.global_mask[0] = 1;
  for (size_t i = 1; i < len; ++i) {
    enc.ids[i] = 3 + static_cast<int32_t>(rng() % (cfg.vocab_size - 3));
    enc.attention_mask[i] = 1;
  }
  enc.true_length = len;
  return enc;
}

}  // namespace

TEST_CASE("config validation catches inconsistent dimensions") {
  EncoderConfig cfg = tiny_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.hidden_dim = 9;  // not divisible by heads
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.window = 3;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.window = 12;  // larger than input_len
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.vocab_size = 2;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = tiny_config();
  cfg.dropout = 1.0f;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("parameter initialization is seeded and shaped") {
  auto cfg = tiny_config();
  Parameters a = Parameters::init(cfg, 7);
  Parameters b = Parameters::init(cfg, 7);
  Parameters c = Parameters::init(cfg, 8);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.token_embedding.rows == 16);
  CHECK(a.token_embedding.cols == 8);
  CHECK(a.position_embedding.rows == 10);
  REQUIRE(a.blocks.size() == 2);
  CHECK(a.blocks[0].fc1_w.rows == 8);
  CHECK(a.blocks[0].fc1_w.cols == 12);
  CHECK(a.head2_w.cols == 6);
  CHECK(a.all_finite());
  // Gains start at one, biases at zero.
  for (float v : a.blocks[0].ln1_gain.data) CHECK(v == 1.0f);
  for (float v : a.blocks[0].ln1_bias.data) CHECK(v == 0.0f);
}

TEST_CASE("tensor visitation order is stable and complete") {
  auto cfg = tiny_config();
  Parameters p = Parameters::init(cfg, 1);
  std::vector<std::string> names;
  p.visit([&](const std::string& n, const Tensor&) { names.push_back(n); });
  REQUIRE(names.size() == p.tensor_count());
  CHECK(names[0] == "token_embedding");
  CHECK(names[1] == "position_embedding");
  CHECK(names[2] == "block0.ln1.gain");
  // Two blocks of 22 tensors plus embeddings and the two head layers.
  CHECK(names.size() == 2 + 2 * 22 + 4);
  CHECK(names.back() == "head.fc2.bias");
}

TEST_CASE("embeddings are unit length and deterministic") {
  auto cfg = tiny_config();
  Encoder enc(cfg, Parameters::init(cfg, 3));
  auto f = random_encoded(cfg, 1);
  auto e1 = enc.embed(f);
  auto e2 = enc.embed(f);
  REQUIRE(e1.size() == cfg.embed_dim);
  CHECK(e1 == e2);
  double norm = 0;
  for (float v : e1) norm += double(v) * v;
  CHECK(std::sqrt(norm) == Catch::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batched embedding equals one-at-a-time embedding") {
  auto cfg = tiny_config();
  Encoder enc(cfg, Parameters::init(cfg, 4));
  std::vector<EncodedFunction> batch;
  for (uint32_t i = 0; i < 5; ++i) batch.push_back(random_encoded(cfg, 10 + i));
  Tensor all = enc.embed_batch(batch);
  REQUIRE(all.rows == 5);
  for (size_t i = 0; i < 5; ++i) {
    auto one = enc.embed(batch[i]);
    for (size_t c = 0; c < cfg.embed_dim; ++c) CHECK(all.at(i, c) == one[c]);
  }
}

TEST_CASE("forward pass matches an independent loop implementation") {
  auto cfg = tiny_config();
  Parameters params = Parameters::init(cfg, 5);
  Encoder enc(cfg, params);
  for (uint32_t s = 0; s < 8; ++s) {
    auto f = random_encoded(cfg, 100 + s);
    auto got = enc.embed(f);
    auto want = faser::testing::reference_embed(cfg, params, f);
    REQUIRE(got.size() == want.size());
    for (size_t c = 0; c < got.size(); ++c)
      CHECK(got[c] == Catch::Approx(want[c]).margin(2e-4));
  }
}

TEST_CASE("tied global projections match the reference") {
  auto cfg = tiny_config();
  cfg.tie_global = true;
  Parameters params = Parameters::init(cfg, 6);
  Encoder enc(cfg, params);
  auto f = random_encoded(cfg, 200);
  f.global_mask[4] = f.attention_mask[4];
  auto got = enc.embed(f);
  auto want = faser::testing::reference_embed(cfg, params, f);
  for (size_t c = 0; c < got.size(); ++c)
    CHECK(got[c] == Catch::Approx(want[c]).margin(2e-4));
}

TEST_CASE("padding beyond the true length does not change the embedding") {
  auto cfg = tiny_config();
  Encoder enc(cfg, Parameters::init(cfg, 7));
  auto f = random_encoded(cfg, 300, 5);
  auto base = enc.embed(f);
  // Garbage in padded id slots is invisible behind the mask.
  auto junk = f;
  for (size_t i = f.true_length; i < cfg.input_len; ++i)
    junk.ids[i] = static_cast<int32_t>(1 + i % (cfg.vocab_size - 1));
  auto out = enc.embed(junk);
  CHECK(out == base);
}

TEST_CASE("different inputs give different embeddings") {
  auto cfg = tiny_config();
  Encoder enc(cfg, Parameters::init(cfg, 8));
  auto a = enc.embed(random_encoded(cfg, 400));
  auto b = enc.embed(random_encoded(cfg, 401));
  CHECK(a != b);
  CHECK(cosine_similarity(a, b) < 1.0);
  CHECK(cosine_similarity(a, a) == Catch::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("embedding batch rejects wrong input lengths") {
  auto cfg = tiny_config();
  Encoder enc(cfg, Parameters::init(cfg, 9));
  EncodedFunction bad;
  bad.ids.assign(4, 0);
  bad.attention_mask.assign(4, 1);
  bad.global_mask.assign(4, 0);
  bad.true_length = 4;
  CHECK_THROWS_AS(enc.embed(bad), ContractError);
  CHECK_THROWS_AS(enc.embed_batch({}), ContractError);
}

TEST_CASE("training mode dropout changes activations but eval mode does not") {
  auto cfg = tiny_config();
  cfg.dropout = 0.5f;
  Parameters params = Parameters::init(cfg, 10);
  auto f = random_encoded(cfg, 500);

  // Two training-mode passes with different rng states diverge.
  std::mt19937 rng1(1), rng2(2);
  Tape t1, t2, t3;
  auto run = [&](Tape& t, std::mt19937& rng, bool training) {
    ParamNodes pn = bind_parameters(t, params, nullptr);
    NodeId cls = encode_sequence(t, pn, cfg, f, training, rng);
    NodeId emb = project_head(t, pn, {cls});
    return t.val(emb);
  };
  Tensor a = run(t1, rng1, true);
  Tensor b = run(t2, rng2, true);
  CHECK(a != b);
  // Eval mode ignores the rng entirely.
  std::mt19937 rng3(3);
  Tensor c = run(t3, rng3, false);
  Encoder enc(cfg, params);
  auto d = enc.embed(f);
  for (size_t i = 0; i < d.size(); ++i) CHECK(c.data[i] == d[i]);
}
