#pragma once

// Line-delimited JSON interchange for lifted-function corpora and the
// flattened function-string records derived from them.

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "faser/types.hpp"

namespace faser {

using json = nlohmann::ordered_json;

namespace detail {

inline void validate_instruction(const EsilInstruction& ins, size_t line) {
  if (ins.esil.empty()) throw ParseError(line, "empty esil string");
  for (const auto& tok : split_tokens(ins.esil)) {
    bool blank = tok.find_first_not_of(" \t") == std::string::npos;
    if (blank) throw ParseError(line, "whitespace-only esil token");
  }
}

template <typename T>
T require_field(const json& j, const char* key, size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field ") + key);
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(line, std::string("bad value for field ") + key);
  }
}

inline Provenance provenance_from_json(const json& j, size_t line) {
  Provenance p;
  p.binary_id = require_field<std::string>(j, "binary_id", line);
  p.architecture = require_field<std::string>(j, "architecture", line);
  p.bitness = require_field<int>(j, "bitness", line);
  p.compiler = require_field<std::string>(j, "compiler", line);
  p.opt_level = require_field<std::string>(j, "opt_level", line);
  if (p.bitness != 32 && p.bitness != 64)
    throw ParseError(line, "bitness must be 32 or 64, got " + std::to_string(p.bitness));
  return p;
}

inline void provenance_to_json(json& j, const Provenance& p) {
  j["binary_id"] = p.binary_id;
  j["architecture"] = p.architecture;
  j["bitness"] = p.bitness;
  j["compiler"] = p.compiler;
  j["opt_level"] = p.opt_level;
}

}  // namespace detail

inline RawFunction parse_raw_function(const std::string& text, size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "record is not a JSON object");

  RawFunction f;
  f.name = detail::require_field<std::string>(j, "name", line);
  f.meta = detail::provenance_from_json(j, line);

  auto it = j.find("instructions");
  if (it == j.end()) throw ParseError(line, "missing field instructions");
  if (!it->is_array() || it->empty())
    throw ParseError(line, "instructions must be a non-empty array");
  for (const auto& ji : *it) {
    EsilInstruction ins;
    ins.esil = detail::require_field<std::string>(ji, "esil", line);
    std::string cat = detail::require_field<std::string>(ji, "opcode_category", line);
    if (cat == "call")
      ins.category = OpcodeCategory::call;
    else if (cat == "other")
      ins.category = OpcodeCategory::other;
    else
      throw ParseError(line, "opcode_category must be \"call\" or \"other\", got \"" + cat + "\"");
    detail::validate_instruction(ins, line);
    f.instructions.push_back(std::move(ins));
  }
  return f;
}

// Parses a whole corpus stream, preserving file order. Duplicate
// (name, binary_id) pairs within one stream are rejected.
inline std::vector<RawFunction> parse_corpus(std::istream& in) {
  std::vector<RawFunction> out;
  std::vector<std::pair<std::string, std::string>> seen;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(parse_raw_function(line, lineno));
    seen.emplace_back(out.back().name, out.back().meta.binary_id);
  }
  std::sort(seen.begin(), seen.end());
  auto dup = std::adjacent_find(seen.begin(), seen.end());
  if (dup != seen.end())
    throw ContractError("duplicate (name, binary_id) in corpus: (" + dup->first + ", " +
                        dup->second + ")");
  return out;
}

inline json raw_function_to_json(const RawFunction& f) {
  json j;
  j["name"] = f.name;
  detail::provenance_to_json(j, f.meta);
  json instrs = json::array();
  for (const auto& ins : f.instructions) {
    instrs.push_back({{"esil", ins.esil}, {"opcode_category", to_string(ins.category)}});
  }
  j["instructions"] = std::move(instrs);
  return j;
}

inline void write_corpus(std::ostream& out, const std::vector<RawFunction>& fns) {
  for (const auto& f : fns) out << raw_function_to_json(f).dump() << '\n';
}

inline FunctionString to_function_string(const RawFunction& f) {
  if (f.instructions.empty()) throw ContractError("function " + f.name + " has no instructions");
  FunctionString fs;
  fs.label = f.name;
  fs.meta = f.meta;
  fs.instr_token_counts.reserve(f.instructions.size());
  fs.instr_calls.reserve(f.instructions.size());
  for (size_t i = 0; i < f.instructions.size(); ++i) {
    const auto& ins = f.instructions[i];
    if (i) fs.body += ',';
    fs.body += ins.esil;
    uint32_t n = static_cast<uint32_t>(count_tokens(ins.esil));
    fs.instr_token_counts.push_back(n);
    fs.instr_calls.push_back(ins.category == OpcodeCategory::call ? 1 : 0);
    fs.token_count += n;
  }
  return fs;
}

// -- function-string record serialization (shared by FunctionString and
//    NormalizedFunction, which have the same wire schema) --

namespace detail {

template <typename Record>
json record_to_json(const Record& r) {
  json j;
  j["label"] = r.label;
  json meta;
  provenance_to_json(meta, r.meta);
  meta["instr_token_counts"] = r.instr_token_counts;
  meta["instr_calls"] = r.instr_calls;
  j["meta"] = std::move(meta);
  j["body"] = r.body;
  j["token_count"] = r.token_count;
  return j;
}

template <typename Record>
Record record_from_json(const std::string& text, size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  Record r;
  r.label = require_field<std::string>(j, "label", line);
  auto mit = j.find("meta");
  if (mit == j.end()) throw ParseError(line, "missing field meta");
  r.meta = provenance_from_json(*mit, line);
  if (mit->contains("instr_token_counts"))
    r.instr_token_counts = mit->at("instr_token_counts").get<std::vector<uint32_t>>();
  if (mit->contains("instr_calls"))
    r.instr_calls = mit->at("instr_calls").get<std::vector<uint8_t>>();
  r.body = require_field<std::string>(j, "body", line);
  r.token_count = require_field<size_t>(j, "token_count", line);
  if (r.body.empty()) throw ParseError(line, "empty body");
  if (r.token_count != count_tokens(r.body))
    throw ParseError(line, "token_count does not match body");
  if (r.instr_token_counts.size() != r.instr_calls.size())
    throw ParseError(line, "instr_token_counts and instr_calls lengths differ");
  if (!r.instr_token_counts.empty()) {
    size_t total = 0;
    for (uint32_t n : r.instr_token_counts) total += n;
    if (total != r.token_count)
      throw ParseError(line, "instruction spans do not cover the body");
  }
  return r;
}

template <typename Record>
std::vector<Record> read_records(std::istream& in) {
  std::vector<Record> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(record_from_json<Record>(line, lineno));
  }
  return out;
}

}  // namespace detail

inline void write_function_strings(std::ostream& out, const std::vector<FunctionString>& fns) {
  for (const auto& f : fns) out << detail::record_to_json(f).dump() << '\n';
}

inline std::vector<FunctionString> read_function_strings(std::istream& in) {
  return detail::read_records<FunctionString>(in);
}

inline void write_normalized(std::ostream& out, const std::vector<NormalizedFunction>& fns) {
  for (const auto& f : fns) out << detail::record_to_json(f).dump() << '\n';
}

inline std::vector<NormalizedFunction> read_normalized(std::istream& in) {
  return detail::read_records<NormalizedFunction>(in);
}

}  // namespace faser
