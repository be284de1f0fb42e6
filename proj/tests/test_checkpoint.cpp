#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "faser/checkpoint.hpp"
#include "support/helpers.hpp"

using namespace faser;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.input_len = 8;
  cfg.num_blocks = 1;
  cfg.hidden_dim = 4;
  cfg.num_heads = 2;
  cfg.intermediate_dim = 8;
  cfg.window = 2;
  cfg.embed_dim = 4;
  cfg.vocab_size = 8;
  cfg.dropout = 0.1f;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoints round trip bit for bit") {
  auto cfg = small_config();
  Parameters p = Parameters::init(cfg, 11);
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, cfg, p);
  const std::string bytes = out.str();

  std::istringstream in(bytes, std::ios::binary);
  Checkpoint ck = load_checkpoint(in);
  CHECK(ck.config == cfg);
  CHECK(ck.params == p);

  // Saving the loaded model reproduces the same bytes.
  std::ostringstream out2(std::ios::binary);
  save_checkpoint(out2, ck.config, ck.params);
  CHECK(out2.str() == bytes);
}

TEST_CASE("checkpoint files start with the format magic") {
  auto cfg = small_config();
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, cfg, Parameters::init(cfg, 1));
  CHECK(out.str().substr(0, 4) == "FASR");
}

TEST_CASE("file based round trip preserves everything") {
  faser::testing::TempDir tmp;
  auto cfg = small_config();
  Parameters p = Parameters::init(cfg, 12);
  auto path = tmp.file("model.fasr");
  save_checkpoint(path, cfg, p);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config == cfg);
  CHECK(ck.params == p);
}

TEST_CASE("corrupted magic or version is rejected") {
  auto cfg = small_config();
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, cfg, Parameters::init(cfg, 1));
  std::string bytes = out.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic, std::ios::binary);
  CHECK_THROWS_AS(load_checkpoint(in1), ContractError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::istringstream in2(bad_version, std::ios::binary);
  CHECK_THROWS_AS(load_checkpoint(in2), ContractError);
}

TEST_CASE("truncated files fail loudly") {
  auto cfg = small_config();
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, cfg, Parameters::init(cfg, 1));
  std::string bytes = out.str();
  for (size_t cut : {bytes.size() / 4, bytes.size() / 2, bytes.size() - 3}) {
    std::istringstream in(bytes.substr(0, cut), std::ios::binary);
    CHECK_THROWS_AS(load_checkpoint(in), ContractError);
  }
}

TEST_CASE("fingerprint tracks parameter changes") {
  auto cfg = small_config();
  Parameters p = Parameters::init(cfg, 13);
  uint64_t f1 = checkpoint_fingerprint(cfg, p);
  CHECK(f1 == checkpoint_fingerprint(cfg, p));
  p.head2_w.data[0] += 1e-3f;
  CHECK(checkpoint_fingerprint(cfg, p) != f1);
}

TEST_CASE("loading validates the stored config") {
  // Hand-build a header with a zero hidden_dim.
  auto cfg = small_config();
  std::ostringstream out(std::ios::binary);
  save_checkpoint(out, cfg, Parameters::init(cfg, 1));
  std::string bytes = out.str();
  // Config words start after magic + version: input_len is first, hidden_dim
  // third (little endian u32 each).
  size_t off = 4 + 4 + 2 * 4;
  bytes[off] = bytes[off + 1] = bytes[off + 2] = bytes[off + 3] = 0;
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_AS(load_checkpoint(in), ContractError);
}
