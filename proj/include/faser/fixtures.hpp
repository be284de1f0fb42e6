#pragma once

// Synthetic paired-corpus generator. One skeleton (instruction shapes, token
// kinds, literal values) is drawn per corpus; every label is a distinct
// permutation of the skeleton's tokens within each kind, and variants apply
// an architecture-specific register assignment plus stochastic token
// mutations at configured rates. All labels therefore share the same token
// multiset and length: labels are distinguishable by token arrangement, not
// by bag-of-words statistics, which mirrors normalized lifted code where
// every function is built from the same small operator vocabulary.
//
// Register use is consistent within a function (slot k always maps to the
// same register), mimicking the renaming variation that RN-mode
// normalization is meant to collapse.
//
// Generation is deterministic given the seed: the skeleton derives from the
// corpus seed and every label derives its own rng stream.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "faser/normalize.hpp"
#include "faser/types.hpp"

namespace faser {

struct SynthConfig {
  uint32_t num_labels = 10;
  uint32_t variants_per_label = 2;
  std::vector<std::string> architectures = {"arm32"};
  uint32_t alphabet_size = 32;   // distinct opcode-ish tokens
  uint32_t min_instructions = 4;
  uint32_t max_instructions = 12;
  float substitution_rate = 0.0f;
  float insertion_rate = 0.0f;
  float deletion_rate = 0.0f;
  // Probability that a variant rotates the register assignment, producing
  // register-renaming variation with otherwise identical tokens.
  float register_renaming_rate = 0.0f;
  uint64_t seed = 0;

  void validate() const {
    if (num_labels < 1) throw ContractError("fixtures: num_labels must be >= 1");
    if (variants_per_label < 2)
      throw ContractError("fixtures: variants_per_label must be >= 2");
    if (architectures.empty()) throw ContractError("fixtures: need at least one architecture");
    if (alphabet_size < 4) throw ContractError("fixtures: alphabet_size must be >= 4");
    if (min_instructions < 1 || max_instructions < min_instructions)
      throw ContractError("fixtures: bad instruction count range");
    for (float r : {substitution_rate, insertion_rate, deletion_rate, register_renaming_rate})
      if (r < 0.0f || r > 1.0f) throw ContractError("fixtures: rates must be in [0, 1]");
  }
};

namespace detail {

inline std::vector<std::string> arch_register_pool(const std::string& arch) {
  static const RegisterTable table = RegisterTable::builtin();
  const auto* regs = table.find(arch);
  if (!regs)
    throw ContractError("fixtures: no built-in register table for architecture \"" + arch +
                        "\"");
  std::vector<std::string> names;
  names.reserve(regs->size());
  for (const auto& [name, width] : *regs) names.push_back(name);
  std::sort(names.begin(), names.end());
  return names;
}

// An architecture is 64-bit when its table maps any 64-bit register.
inline int arch_bitness(const std::string& arch) {
  static const RegisterTable table = RegisterTable::builtin();
  const auto* regs = table.find(arch);
  if (!regs) return 32;
  for (const auto& [name, width] : *regs)
    if (width == RegisterWidth::w64) return 64;
  return 32;
}

// Token kinds a base instruction slot can hold. Register slots are indices
// into the per-function slot table, resolved per variant.
struct BaseToken {
  enum class Kind : uint8_t { opcode, reg_slot, literal };
  Kind kind = Kind::opcode;
  uint32_t value = 0;       // opcode index or register slot
  std::string literal;
};

struct BaseInstruction {
  std::vector<BaseToken> tokens;
  OpcodeCategory category = OpcodeCategory::other;
};

inline constexpr uint32_t kRegisterSlots = 6;

inline std::string literal_token(std::mt19937& rng) {
  // Mix of small hex (IMM), long hex (MEM), small and large decimals so all
  // normalization rules fire on fixture corpora.
  static const char* hexdigits = "0123456789abcdef";
  switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
    case 0: {
      size_t len = std::uniform_int_distribution<size_t>(1, 3)(rng);
      std::string s = "0x";
      for (size_t i = 0; i < len; ++i)
        s += hexdigits[std::uniform_int_distribution<int>(0, 15)(rng)];
      return s;
    }
    case 1: {
      size_t len = std::uniform_int_distribution<size_t>(4, 8)(rng);
      std::string s = "0x";
      for (size_t i = 0; i < len; ++i)
        s += hexdigits[std::uniform_int_distribution<int>(0, 15)(rng)];
      return s;
    }
    case 2:
      return std::to_string(std::uniform_int_distribution<uint32_t>(0, 4095)(rng));
    default:
      return std::to_string(std::uniform_int_distribution<uint32_t>(4096, 1u << 20)(rng));
  }
}

// The corpus-wide skeleton: instruction shapes and the token content of
// every slot. Labels permute the content within each kind, so all labels
// share one token multiset and length.
inline std::vector<BaseInstruction> generate_skeleton(std::mt19937& rng,
                                                      const SynthConfig& cfg) {
  std::vector<BaseInstruction> instrs;
  size_t count = std::uniform_int_distribution<uint32_t>(cfg.min_instructions,
                                                         cfg.max_instructions)(rng);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (size_t i = 0; i < count; ++i) {
    BaseInstruction ins;
    ins.category = unit(rng) < 0.15f ? OpcodeCategory::call : OpcodeCategory::other;
    size_t width = std::uniform_int_distribution<size_t>(2, 4)(rng);
    for (size_t t = 0; t < width; ++t) {
      BaseToken tok;
      float roll = unit(rng);
      if (t == 0 || roll < 0.4f) {
        tok.kind = BaseToken::Kind::opcode;
        tok.value = std::uniform_int_distribution<uint32_t>(0, cfg.alphabet_size - 1)(rng);
      } else if (roll < 0.8f) {
        tok.kind = BaseToken::Kind::reg_slot;
        tok.value = std::uniform_int_distribution<uint32_t>(0, kRegisterSlots - 1)(rng);
      } else {
        tok.kind = BaseToken::Kind::literal;
        tok.literal = literal_token(rng);
      }
      ins.tokens.push_back(std::move(tok));
    }
    // Call instructions carry a large decimal target so the FUNC rule fires.
    if (ins.category == OpcodeCategory::call) {
      BaseToken target;
      target.kind = BaseToken::Kind::literal;
      target.literal = std::to_string(std::uniform_int_distribution<uint32_t>(4096, 1u << 20)(rng));
      ins.tokens.push_back(std::move(target));
    }
    instrs.push_back(std::move(ins));
  }
  // Every corpus exercises the FUNC rule: force one call if none was drawn.
  bool has_call = false;
  for (const auto& ins : instrs)
    if (ins.category == OpcodeCategory::call) has_call = true;
  if (!has_call) {
    auto& ins = instrs[instrs.size() / 2];
    ins.category = OpcodeCategory::call;
    BaseToken target;
    target.kind = BaseToken::Kind::literal;
    target.literal = std::to_string(std::uniform_int_distribution<uint32_t>(4096, 1u << 20)(rng));
    ins.tokens.push_back(std::move(target));
  }
  return instrs;
}

// A label's base: the skeleton with opcode values, register slots, and
// literal strings each shuffled among the positions of their own kind.
inline std::vector<BaseInstruction> permute_skeleton(const std::vector<BaseInstruction>& skeleton,
                                                     std::mt19937& rng) {
  std::vector<uint32_t> opcodes;
  std::vector<uint32_t> slots;
  std::vector<std::string> literals;
  for (const auto& ins : skeleton)
    for (const auto& tok : ins.tokens) switch (tok.kind) {
        case BaseToken::Kind::opcode: opcodes.push_back(tok.value); break;
        case BaseToken::Kind::reg_slot: slots.push_back(tok.value); break;
        case BaseToken::Kind::literal: literals.push_back(tok.literal); break;
      }
  std::shuffle(opcodes.begin(), opcodes.end(), rng);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::shuffle(literals.begin(), literals.end(), rng);

  std::vector<BaseInstruction> base = skeleton;
  size_t oi = 0, si = 0, li = 0;
  for (auto& ins : base)
    for (auto& tok : ins.tokens) switch (tok.kind) {
        case BaseToken::Kind::opcode: tok.value = opcodes[oi++]; break;
        case BaseToken::Kind::reg_slot: tok.value = slots[si++]; break;
        case BaseToken::Kind::literal: tok.literal = literals[li++]; break;
      }
  return base;
}

}  // namespace detail

inline std::vector<RawFunction> generate_fixtures(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<std::string>> pools;
  pools.reserve(cfg.architectures.size());
  for (const auto& arch : cfg.architectures) {
    auto pool = detail::arch_register_pool(arch);
    if (pool.size() < detail::kRegisterSlots)
      throw ContractError("fixtures: register pool for \"" + arch + "\" is too small");
    pools.push_back(std::move(pool));
  }

  std::mt19937 skeleton_rng(static_cast<uint32_t>(cfg.seed * 2654435761u + 11u));
  const auto skeleton = detail::generate_skeleton(skeleton_rng, cfg);

  std::vector<RawFunction> out;
  out.reserve(size_t(cfg.num_labels) * cfg.variants_per_label);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  for (uint32_t li = 0; li < cfg.num_labels; ++li) {
    std::mt19937 rng(static_cast<uint32_t>(cfg.seed * 2654435761u + li * 2246822519u + 97u));
    auto base = detail::permute_skeleton(skeleton, rng);

    for (uint32_t v = 0; v < cfg.variants_per_label; ++v) {
      const size_t arch_ix = v % cfg.architectures.size();
      const auto& pool = pools[arch_ix];
      uint32_t rotation = 0;
      if (cfg.register_renaming_rate > 0.0f && unit(rng) < cfg.register_renaming_rate)
        rotation = 1u + (v % (static_cast<uint32_t>(pool.size()) - 1u));

      RawFunction fn;
      fn.name = "fn_" + std::to_string(li);
      fn.meta.binary_id = "bin_" + cfg.architectures[arch_ix] + "_v" + std::to_string(v);
      fn.meta.architecture = cfg.architectures[arch_ix];
      fn.meta.bitness = detail::arch_bitness(fn.meta.architecture);
      fn.meta.compiler = "synthcc";
      fn.meta.opt_level = "O" + std::to_string(v % 3);

      for (const auto& ins : base) {
        std::vector<std::string> tokens;
        for (const auto& tok : ins.tokens) {
          std::string text;
          switch (tok.kind) {
            case detail::BaseToken::Kind::opcode:
              text = "op" + std::to_string(tok.value);
              break;
            case detail::BaseToken::Kind::reg_slot:
              text = pool[(tok.value + rotation) % pool.size()];
              break;
            case detail::BaseToken::Kind::literal:
              text = tok.literal;
              break;
          }
          // Stochastic mutations; instructions never mutate to empty.
          if (cfg.deletion_rate > 0.0f && unit(rng) < cfg.deletion_rate && tokens.size() > 0)
            continue;
          if (cfg.substitution_rate > 0.0f && unit(rng) < cfg.substitution_rate)
            text = "op" +
                   std::to_string(std::uniform_int_distribution<uint32_t>(
                       0, cfg.alphabet_size - 1)(rng));
          tokens.push_back(std::move(text));
          if (cfg.insertion_rate > 0.0f && unit(rng) < cfg.insertion_rate)
            tokens.push_back("op" + std::to_string(std::uniform_int_distribution<uint32_t>(
                                        0, cfg.alphabet_size - 1)(rng)));
        }
        if (tokens.empty()) tokens.push_back("op0");
        EsilInstruction out_ins;
        out_ins.category = ins.category;
        out_ins.esil = join_tokens(tokens);
        fn.instructions.push_back(std::move(out_ins));
      }
      out.push_back(std::move(fn));
    }
  }
  return out;
}

}  // namespace faser
