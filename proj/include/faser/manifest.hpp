#pragma once

// Reproducibility manifest written next to the primary output of every
// mutating command: the exact command line, the effective configuration,
// content digests of all inputs, the seed and tool version, and wall-clock
// timestamps.

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "faser/hash.hpp"
#include "faser/types.hpp"
#include "faser/version.hpp"

namespace faser {

inline std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractError("cannot open input for digest: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return murmur3_128(bytes.data(), bytes.size()).hex();
}

inline std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class RunManifest {
 public:
  RunManifest(int argc, const char* const* argv) : started_(utc_timestamp()) {
    for (int i = 0; i < argc; ++i) command_.emplace_back(argv[i]);
  }

  void add_input(const std::string& path) {
    inputs_.push_back({path, file_digest_hex(path)});
  }

  void set_seed(uint64_t seed) {
    seed_ = seed;
    has_seed_ = true;
  }

  void set_config(const std::map<std::string, std::string>& kv) { config_ = kv; }

  void write(const std::string& output_path) const {
    nlohmann::ordered_json j;
    j["tool_version"] = kVersion;
    j["command"] = command_;
    if (has_seed_) j["seed"] = seed_;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::ordered_json ins = nlohmann::ordered_json::array();
    for (const auto& in : inputs_)
      ins.push_back({{"path", in.path}, {"digest", in.digest}});
    j["inputs"] = ins;
    j["started"] = started_;
    j["finished"] = utc_timestamp();
    std::ofstream out(output_path);
    if (!out) throw ContractError("cannot write manifest: " + output_path);
    out << j.dump(2) << '\n';
  }

 private:
  struct Input {
    std::string path;
    std::string digest;
  };
  std::vector<std::string> command_;
  std::vector<Input> inputs_;
  std::map<std::string, std::string> config_;
  uint64_t seed_ = 0;
  bool has_seed_ = false;
  std::string started_;
};

}  // namespace faser
