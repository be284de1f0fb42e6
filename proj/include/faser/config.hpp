#pragma once

// Flat `key = value` config text with [section] headers and # comments.
// Values are addressed as "section.key"; keys before any section header have
// no prefix. Unknown keys are rejected by the typed loaders so typos fail
// loudly instead of silently using defaults.

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "faser/encoder.hpp"
#include "faser/train.hpp"
#include "faser/types.hpp"

namespace faser {

class ConfigFile {
 public:
  static ConfigFile parse(std::istream& in) {
    ConfigFile cf;
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = trim(line);
      // Inline comments start at a # or ; that opens the line or follows
      // whitespace, so values themselves may not contain either character.
      for (size_t i = 0; i < sv.size(); ++i)
        if ((sv[i] == '#' || sv[i] == ';') &&
            (i == 0 || sv[i - 1] == ' ' || sv[i - 1] == '\t')) {
          sv = trim(sv.substr(0, i));
          break;
        }
      if (sv.empty()) continue;
      if (sv.front() == '[') {
        if (sv.back() != ']') throw ParseError(lineno, "unterminated section header");
        section = std::string(trim(sv.substr(1, sv.size() - 2)));
        if (section.empty()) throw ParseError(lineno, "empty section name");
        continue;
      }
      size_t eq = sv.find('=');
      if (eq == std::string_view::npos) throw ParseError(lineno, "expected key = value");
      std::string key(trim(sv.substr(0, eq)));
      std::string value(trim(sv.substr(eq + 1)));
      if (key.empty()) throw ParseError(lineno, "empty key");
      std::string full = section.empty() ? key : section + "." + key;
      if (!values_emplace(cf, full, value)) throw ParseError(lineno, "duplicate key " + full);
    }
    return cf;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file: " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    consumed_.insert(key);
    return it == values_.end() ? fallback : it->second;
  }

  uint32_t get_u32(const std::string& key, uint32_t fallback) const {
    auto it = values_.find(key);
    consumed_.insert(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      unsigned long v = std::stoul(it->second, &pos);
      if (pos != it->second.size() || v > UINT32_MAX) throw std::invalid_argument("");
      return static_cast<uint32_t>(v);
    } catch (...) {
      throw ContractError("config key " + key + ": \"" + it->second + "\" is not an integer");
    }
  }

  uint64_t get_u64(const std::string& key, uint64_t fallback) const {
    auto it = values_.find(key);
    consumed_.insert(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      unsigned long long v = std::stoull(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return static_cast<uint64_t>(v);
    } catch (...) {
      throw ContractError("config key " + key + ": \"" + it->second + "\" is not an integer");
    }
  }

  float get_f32(const std::string& key, float fallback) const {
    auto it = values_.find(key);
    consumed_.insert(key);
    if (it == values_.end()) return fallback;
    try {
      size_t pos = 0;
      float v = std::stof(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ContractError("config key " + key + ": \"" + it->second + "\" is not a number");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    consumed_.insert(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw ContractError("config key " + key + ": \"" + it->second + "\" is not a boolean");
  }

  // Call after reading everything the caller understands.
  void reject_unconsumed() const {
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key)) throw ContractError("unknown config key: " + key);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
      s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
      s.remove_suffix(1);
    return s;
  }

  static bool values_emplace(ConfigFile& cf, const std::string& key, const std::string& value) {
    return cf.values_.emplace(key, value).second;
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

// Model + training settings from one config file. vocab_size and the sampler
// seed come from the caller (vocabulary file and --seed flag).
struct TrainSettings {
  EncoderConfig encoder;
  TrainConfig train;
};

inline TrainSettings load_train_settings(const ConfigFile& cf) {
  TrainSettings s;
  EncoderConfig d;  // defaults
  s.encoder.input_len = cf.get_u32("encoder.input_len", d.input_len);
  s.encoder.num_blocks = cf.get_u32("encoder.num_blocks", d.num_blocks);
  s.encoder.hidden_dim = cf.get_u32("encoder.hidden_dim", d.hidden_dim);
  s.encoder.num_heads = cf.get_u32("encoder.num_heads", d.num_heads);
  s.encoder.intermediate_dim = cf.get_u32("encoder.intermediate_dim", d.intermediate_dim);
  s.encoder.window = cf.get_u32("encoder.window", d.window);
  s.encoder.embed_dim = cf.get_u32("encoder.embed_dim", d.embed_dim);
  s.encoder.dropout = cf.get_f32("encoder.dropout", d.dropout);
  s.encoder.tie_global = cf.get_bool("encoder.tie_global", d.tie_global);

  s.train.sampler.m = cf.get_u32("sampler.m", s.train.sampler.m);
  s.train.sampler.batch_size = cf.get_u32("sampler.batch_size", s.train.sampler.batch_size);
  s.train.sampler.functions_per_epoch =
      cf.get_u32("sampler.functions_per_epoch", s.train.sampler.functions_per_epoch);

  s.train.loss.margin = cf.get_f32("loss.margin", s.train.loss.margin);
  s.train.loss.gamma = cf.get_f32("loss.gamma", s.train.loss.gamma);
  s.train.all_pairs = cf.get_bool("loss.all_pairs", s.train.all_pairs);

  s.train.optimizer.learning_rate =
      cf.get_f32("optimizer.learning_rate", s.train.optimizer.learning_rate);
  s.train.optimizer.accumulation_steps =
      cf.get_u32("optimizer.accumulation_steps", s.train.optimizer.accumulation_steps);
  s.train.optimizer.beta1 = cf.get_f32("optimizer.beta1", s.train.optimizer.beta1);
  s.train.optimizer.beta2 = cf.get_f32("optimizer.beta2", s.train.optimizer.beta2);
  s.train.optimizer.eps = cf.get_f32("optimizer.eps", s.train.optimizer.eps);

  s.train.epochs = cf.get_u32("train.epochs", s.train.epochs);
  s.train.save_every = cf.get_u32("train.save_every", s.train.save_every);
  cf.reject_unconsumed();
  return s;
}

}  // namespace faser
