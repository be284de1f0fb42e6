#pragma once

// Token rewrite rules that collapse the open-ended parts of ESIL strings
// (immediates, addresses, call/data targets, registers) into a closed
// placeholder alphabet. Applied in a fixed order, first match wins:
//
//   1. hex literal starting 0xfffff          -> IMM   (sign-extended values)
//   2. hex literal, 1-3 digits               -> IMM
//   3. hex literal, 4+ digits                -> MEM
//   4. decimal literal >= addr_min           -> FUNC on call opcodes, else DATA
//   5. register in the architecture table    -> reg32 / reg64 (RN mode only)
//   6. anything else                         -> unchanged

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "faser/types.hpp"

namespace faser {

struct NormalizationMode {
  bool register_normalization = false;
};

inline constexpr uint64_t kDefaultAddrMin = 4096;

enum class RegisterWidth : uint8_t { w32, w64, other };

// Per-architecture register -> width-class map. Keys are canonicalized
// (lowercase, '-'/'_' stripped) so "X86-64", "x86_64" and "x8664" agree.
class RegisterTable {
 public:
  using ArchTable = std::unordered_map<std::string, RegisterWidth>;

  static std::string canonical_arch(std::string_view arch) {
    std::string out;
    out.reserve(arch.size());
    for (char c : arch) {
      if (c == '-' || c == '_') continue;
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  }

  static RegisterTable builtin() {
    RegisterTable t;
    auto& x86 = t.tables_["x86"];
    for (const char* r : {"eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"})
      x86[r] = RegisterWidth::w32;

    auto& x64 = t.tables_["x8664"];
    for (const char* r : {"rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp", "r8", "r9",
                          "r10", "r11", "r12", "r13", "r14", "r15"})
      x64[r] = RegisterWidth::w64;
    for (const char* r : {"eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "r8d", "r9d",
                          "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"})
      x64[r] = RegisterWidth::w32;

    auto& arm32 = t.tables_["arm32"];
    for (const char* r : {"r0", "r1", "r2", "r3", "r4", "r5", "r6", "r7", "r8", "r9", "r10",
                          "r11", "r12", "sp", "lr", "fp", "ip", "sl"})
      arm32[r] = RegisterWidth::w32;

    auto& arm64 = t.tables_["arm64"];
    for (int i = 0; i <= 30; ++i) {
      arm64["x" + std::to_string(i)] = RegisterWidth::w64;
      arm64["w" + std::to_string(i)] = RegisterWidth::w32;
    }
    arm64["sp"] = RegisterWidth::w64;
    arm64["xzr"] = RegisterWidth::w64;
    arm64["wzr"] = RegisterWidth::w32;

    ArchTable mips;
    for (const char* r : {"zero", "at", "v0", "v1", "a0", "a1", "a2", "a3", "t0", "t1", "t2",
                          "t3", "t4", "t5", "t6", "t7", "t8", "t9", "s0", "s1", "s2", "s3",
                          "s4", "s5", "s6", "s7", "s8", "k0", "k1", "gp", "sp", "fp", "ra"})
      mips[r] = RegisterWidth::w32;
    t.tables_["mips32"] = mips;
    auto& mips64 = t.tables_["mips64"];
    for (const auto& [name, _] : mips) mips64[name] = RegisterWidth::w64;

    auto& rv32 = t.tables_["riscv32"];
    for (const char* r : {"zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "t3", "t4", "t5",
                          "t6", "s0", "s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9",
                          "s10", "s11", "a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7", "fp"})
      rv32[r] = RegisterWidth::w32;

    return t;
  }

  // Override file: one JSON object per architecture mapping register -> 32|64.
  // Entries merge into any builtin table for the same architecture, so a
  // partial file retargets individual registers without dropping the rest.
  void load_overrides(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open register table file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ContractError("register table file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ContractError("register table file must be a JSON object");
    for (auto& [arch, regs] : j.items()) {
      ArchTable& table = tables_[canonical_arch(arch)];
      for (auto& [reg, width] : regs.items()) {
        int w = width.get<int>();
        if (w != 32 && w != 64)
          throw ContractError("register width must be 32 or 64 for " + arch + "." + reg);
        table[canonical_token(reg)] = w == 32 ? RegisterWidth::w32 : RegisterWidth::w64;
      }
    }
  }

  const ArchTable* find(std::string_view arch) const {
    auto it = tables_.find(canonical_arch(arch));
    return it == tables_.end() ? nullptr : &it->second;
  }

  static std::string canonical_token(std::string_view tok) {
    std::string out(tok);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }

 private:
  std::unordered_map<std::string, ArchTable> tables_;
};

struct TokenContext {
  OpcodeCategory category = OpcodeCategory::other;
  // Resolved table for the function's architecture; nullptr when register
  // normalization is off.
  const RegisterTable::ArchTable* registers = nullptr;
  uint64_t addr_min = kDefaultAddrMin;
};

namespace detail {

inline bool is_hex_literal(std::string_view tok) {
  if (tok.size() < 3) return false;
  if (tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X')) return false;
  for (size_t i = 2; i < tok.size(); ++i)
    if (!std::isxdigit(static_cast<unsigned char>(tok[i]))) return false;
  return true;
}

inline bool is_decimal_literal(std::string_view tok) {
  if (tok.empty()) return false;
  for (char c : tok)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

inline bool decimal_at_least(std::string_view tok, uint64_t threshold) {
  size_t i = 0;
  while (i + 1 < tok.size() && tok[i] == '0') ++i;
  std::string_view digits = tok.substr(i);
  if (digits.size() > 20) return true;  // beyond uint64 range
  uint64_t v = 0;
  for (char c : digits) {
    uint64_t d = uint64_t(c - '0');
    if (v > (UINT64_MAX - d) / 10) return true;
    v = v * 10 + d;
  }
  return v >= threshold;
}

inline bool has_prefix_0xfffff(std::string_view tok) {
  if (tok.size() < 7) return false;
  if (tok[0] != '0' || (tok[1] != 'x' && tok[1] != 'X')) return false;
  for (size_t i = 2; i < 7; ++i)
    if (tok[i] != 'f' && tok[i] != 'F') return false;
  return true;
}

}  // namespace detail

inline std::string normalize_token(const std::string& tok, const TokenContext& ctx) {
  if (detail::is_hex_literal(tok)) {
    if (detail::has_prefix_0xfffff(tok)) return "IMM";
    size_t digits = tok.size() - 2;
    return digits <= 3 ? "IMM" : "MEM";
  }
  if (detail::is_decimal_literal(tok) && detail::decimal_at_least(tok, ctx.addr_min))
    return ctx.category == OpcodeCategory::call ? "FUNC" : "DATA";
  if (ctx.registers) {
    auto it = ctx.registers->find(RegisterTable::canonical_token(tok));
    if (it != ctx.registers->end()) {
      switch (it->second) {
        case RegisterWidth::w32: return "reg32";
        case RegisterWidth::w64: return "reg64";
        case RegisterWidth::other: break;
      }
    }
  }
  return tok;
}

inline NormalizedFunction normalize_function(const FunctionString& fs,
                                             const NormalizationMode& mode,
                                             const RegisterTable& regs,
                                             uint64_t addr_min = kDefaultAddrMin) {
  const RegisterTable::ArchTable* arch_regs = nullptr;
  if (mode.register_normalization) {
    arch_regs = regs.find(fs.meta.architecture);
    if (!arch_regs)
      throw ContractError("register normalization requested but no register table for "
                          "architecture \"" + fs.meta.architecture + "\"");
  }

  // Instruction spans map each token to the call/other bit of its source
  // instruction. Records without spans are treated as a single non-call
  // instruction.
  if (!fs.instr_token_counts.empty()) {
    size_t total = 0;
    for (uint32_t n : fs.instr_token_counts) total += n;
    if (total != fs.token_count)
      throw ContractError("instruction spans do not cover function " + fs.label);
  }

  NormalizedFunction out;
  out.label = fs.label;
  out.meta = fs.meta;
  out.instr_token_counts = fs.instr_token_counts;
  out.instr_calls = fs.instr_calls;

  TokenContext ctx;
  ctx.registers = arch_regs;
  ctx.addr_min = addr_min;

  auto tokens = split_tokens(fs.body);
  size_t instr = 0;
  size_t remaining = fs.instr_token_counts.empty() ? tokens.size() : fs.instr_token_counts[0];
  std::string body;
  body.reserve(fs.body.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    while (remaining == 0 && instr + 1 < fs.instr_token_counts.size())
      remaining = fs.instr_token_counts[++instr];
    ctx.category = (!fs.instr_calls.empty() && fs.instr_calls[instr])
                       ? OpcodeCategory::call
                       : OpcodeCategory::other;
    if (i) body += ',';
    body += normalize_token(tokens[i], ctx);
    if (remaining > 0) --remaining;
  }
  out.body = std::move(body);
  out.token_count = count_tokens(out.body);
  return out;
}

}  // namespace faser
