#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace faser {

// Thrown when an input stream or file does not match the expected schema.
class ParseError : public std::runtime_error {
 public:
  ParseError(size_t line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Thrown when data violates a documented contract (bad corpus, mismatched
// model/vocab, infeasible sampling request, ...). Mapped to exit code 2 by
// the CLI.
class ContractError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OpcodeCategory : uint8_t { call, other };

inline const char* to_string(OpcodeCategory c) {
  return c == OpcodeCategory::call ? "call" : "other";
}

struct EsilInstruction {
  std::string esil;  // comma-separated tokens for one machine instruction
  OpcodeCategory category = OpcodeCategory::other;

  friend bool operator==(const EsilInstruction&, const EsilInstruction&) = default;
};

// Build provenance carried alongside every function record.
struct Provenance {
  std::string binary_id;
  std::string architecture;
  int bitness = 32;
  std::string compiler;
  std::string opt_level;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct RawFunction {
  std::string name;  // the label used for pairing and dedup
  Provenance meta;
  std::vector<EsilInstruction> instructions;

  friend bool operator==(const RawFunction&, const RawFunction&) = default;
};

// One function flattened to a single comma-joined token string. The
// per-instruction token spans and call bits travel with the record so the
// call/data rewrite rule can still tell which tokens came from a call.
struct FunctionString {
  std::string label;
  Provenance meta;
  std::string body;
  size_t token_count = 0;
  std::vector<uint32_t> instr_token_counts;
  std::vector<uint8_t> instr_calls;  // 1 = call, aligned with instr_token_counts

  friend bool operator==(const FunctionString&, const FunctionString&) = default;
};

// Same record shape after normalization. Normalization maps tokens 1:1, so
// the instruction spans stay valid.
struct NormalizedFunction {
  std::string label;
  Provenance meta;
  std::string body;
  size_t token_count = 0;
  std::vector<uint32_t> instr_token_counts;
  std::vector<uint8_t> instr_calls;

  friend bool operator==(const NormalizedFunction&, const NormalizedFunction&) = default;
};

inline std::vector<std::string> split_tokens(std::string_view body) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = body.find(',', start);
    if (pos == std::string_view::npos) {
      out.emplace_back(body.substr(start));
      break;
    }
    out.emplace_back(body.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline size_t count_tokens(std::string_view body) {
  if (body.empty()) return 0;
  size_t n = 1;
  for (char c : body)
    if (c == ',') ++n;
  return n;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += tokens[i];
  }
  return out;
}

}  // namespace faser
