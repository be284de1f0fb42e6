#pragma once

// Versioned binary checkpoint container, magic "FASR".
//
// Layout (all integers little-endian):
//   "FASR"  u32 version
//   u32 ×8  config: input_len, num_blocks, hidden_dim, num_heads,
//           intermediate_dim, window, embed_dim, vocab_size
//   f32     dropout
//   u32     tie_global (0/1)
//   u32     tensor_count
//   per tensor: u32 name_len, name bytes, u32 rank (=2),
//               u64 ×rank dims (rows, cols), rows*cols f32 values
//
// Round-trips are bit-exact: floats travel as raw IEEE-754 bytes.

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "faser/binio.hpp"
#include "faser/encoder.hpp"
#include "faser/hash.hpp"

namespace faser {

inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& out, const EncoderConfig& cfg, const Parameters& p) {
  out.write("FASR", 4);
  binio::write_u32(out, kCheckpointVersion);
  binio::write_u32(out, cfg.input_len);
  binio::write_u32(out, cfg.num_blocks);
  binio::write_u32(out, cfg.hidden_dim);
  binio::write_u32(out, cfg.num_heads);
  binio::write_u32(out, cfg.intermediate_dim);
  binio::write_u32(out, cfg.window);
  binio::write_u32(out, cfg.embed_dim);
  binio::write_u32(out, cfg.vocab_size);
  binio::write_f32(out, cfg.dropout);
  binio::write_u32(out, cfg.tie_global ? 1 : 0);
  binio::write_u32(out, static_cast<uint32_t>(p.tensor_count()));
  p.visit([&out](const std::string& name, const Tensor& t) {
    binio::write_string(out, name);
    binio::write_u32(out, 2);
    binio::write_u64(out, t.rows);
    binio::write_u64(out, t.cols);
    binio::write_f32_array(out, t.data.data(), t.size());
  });
  if (!out) throw ContractError("checkpoint write failed");
}

inline void save_checkpoint(const std::string& path, const EncoderConfig& cfg,
                            const Parameters& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot open checkpoint for writing: " + path);
  save_checkpoint(out, cfg, p);
}

struct Checkpoint {
  EncoderConfig config;
  Parameters params;
};

inline Checkpoint load_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "FASR")
    throw ContractError("not a checkpoint file (bad magic)");
  uint32_t version = binio::read_u32(in);
  if (version != kCheckpointVersion)
    throw ContractError("unsupported checkpoint version " + std::to_string(version));
  EncoderConfig cfg;
  cfg.input_len = binio::read_u32(in);
  cfg.num_blocks = binio::read_u32(in);
  cfg.hidden_dim = binio::read_u32(in);
  cfg.num_heads = binio::read_u32(in);
  cfg.intermediate_dim = binio::read_u32(in);
  cfg.window = binio::read_u32(in);
  cfg.embed_dim = binio::read_u32(in);
  cfg.vocab_size = binio::read_u32(in);
  cfg.dropout = binio::read_f32(in);
  cfg.tie_global = binio::read_u32(in) != 0;
  cfg.validate();

  Checkpoint ck{cfg, Parameters::shaped(cfg)};
  std::map<std::string, Tensor*> expect;
  ck.params.visit([&expect](const std::string& name, Tensor& t) { expect[name] = &t; });

  uint32_t count = binio::read_u32(in);
  if (count != expect.size())
    throw ContractError("checkpoint holds " + std::to_string(count) + " tensors, config needs " +
                        std::to_string(expect.size()));
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = binio::read_string(in);
    auto it = expect.find(name);
    if (it == expect.end()) throw ContractError("unexpected checkpoint tensor: " + name);
    uint32_t rank = binio::read_u32(in);
    if (rank != 2) throw ContractError("tensor " + name + ": unsupported rank");
    uint64_t rows = binio::read_u64(in);
    uint64_t cols = binio::read_u64(in);
    Tensor* dst = it->second;
    if (rows != dst->rows || cols != dst->cols)
      throw ContractError("tensor " + name + ": shape mismatch against config");
    binio::read_f32_array(in, dst->data.data(), dst->size());
    expect.erase(it);
  }
  if (!expect.empty())
    throw ContractError("checkpoint missing tensor: " + expect.begin()->first);
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

// Content digest used to tie embedding stores to the checkpoint they came
// from (hash of the full serialized byte stream).
inline uint64_t checkpoint_fingerprint(const EncoderConfig& cfg, const Parameters& p) {
  std::ostringstream buf(std::ios::binary);
  save_checkpoint(buf, cfg, p);
  std::string bytes = buf.str();
  return murmur3_128(bytes.data(), bytes.size()).lo;
}

}  // namespace faser
