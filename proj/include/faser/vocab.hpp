#pragma once

// Token vocabulary and fixed-length id encoding.
//
// Ids 0..2 are reserved (PAD, UNK, CLS) and never assigned to corpus tokens.
// Corpus tokens get ids from 3 upward, ordered by descending frequency with
// lexicographic tie-break, so the same corpus multiset always produces the
// same assignment.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "faser/types.hpp"

namespace faser {

inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kUnkId = 1;
inline constexpr int32_t kClsId = 2;
inline constexpr const char* kPadToken = "<PAD>";
inline constexpr const char* kUnkToken = "<UNK>";
inline constexpr const char* kClsToken = "<CLS>";

class Vocabulary;

template <typename Record>
Vocabulary build_vocab(const std::vector<Record>& corpus, uint32_t min_frequency = 1);

class Vocabulary {
 public:
  Vocabulary() {
    id_to_token_ = {kPadToken, kUnkToken, kClsToken};
    for (size_t i = 0; i < id_to_token_.size(); ++i)
      token_to_id_[id_to_token_[i]] = static_cast<int32_t>(i);
  }

  int32_t id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  const std::string& token_of(int32_t id) const {
    if (id < 0 || static_cast<size_t>(id) >= id_to_token_.size())
      throw ContractError("token id out of range: " + std::to_string(id));
    return id_to_token_[static_cast<size_t>(id)];
  }

  size_t size() const { return id_to_token_.size(); }
  uint32_t min_frequency() const { return min_frequency_; }

  void add_token(const std::string& token) {
    if (token_to_id_.count(token)) throw ContractError("duplicate vocab token: " + token);
    token_to_id_[token] = static_cast<int32_t>(id_to_token_.size());
    id_to_token_.push_back(token);
  }

  void save(std::ostream& out) const {
    for (const auto& tok : id_to_token_) out << tok << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ContractError("cannot open vocab file for writing: " + path);
    save(out);
  }

  static Vocabulary load(std::istream& in) {
    Vocabulary v;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno <= 3) {
        const char* expect = lineno == 1 ? kPadToken : lineno == 2 ? kUnkToken : kClsToken;
        if (line != expect)
          throw ParseError(lineno, "vocab file must start with <PAD>, <UNK>, <CLS>; got \"" +
                                       line + "\"");
        continue;
      }
      if (line.empty()) throw ParseError(lineno, "empty vocab token");
      v.add_token(line);
    }
    if (lineno < 3) throw ParseError(lineno + 1, "vocab file truncated before reserved tokens");
    return v;
  }

  static Vocabulary load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open vocab file: " + path);
    return load(in);
  }

 private:
  std::unordered_map<std::string, int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  uint32_t min_frequency_ = 1;

  template <typename Record>
  friend Vocabulary build_vocab(const std::vector<Record>& corpus, uint32_t min_frequency);
};

template <typename Record>
Vocabulary build_vocab(const std::vector<Record>& corpus, uint32_t min_frequency) {
  if (corpus.empty()) throw ContractError("cannot build vocabulary from an empty corpus");
  std::unordered_map<std::string, uint64_t> freq;
  for (const auto& rec : corpus)
    for (auto& tok : split_tokens(rec.body)) ++freq[tok];
  std::vector<std::pair<std::string, uint64_t>> ordered;
  ordered.reserve(freq.size());
  for (auto& [tok, n] : freq)
    if (n >= min_frequency) ordered.emplace_back(tok, n);
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_frequency_ = min_frequency;
  for (auto& entry : ordered) v.add_token(entry.first);
  return v;
}

// Which encoded positions get global attention. Position 0 (CLS) is always
// included; every_k additionally marks positions at multiples of k.
struct GlobalAttentionPolicy {
  enum class Kind : uint8_t { cls_only, every_k };
  Kind kind = Kind::cls_only;
  size_t k = 0;

  static GlobalAttentionPolicy cls_only() { return {}; }

  static GlobalAttentionPolicy every(size_t k) {
    if (k == 0) throw ContractError("every-k global attention needs k >= 1");
    return {Kind::every_k, k};
  }

  bool is_global(size_t position) const {
    if (position == 0) return true;
    return kind == Kind::every_k && position % k == 0;
  }
};

struct EncodedFunction {
  std::string label;
  std::vector<int32_t> ids;            // length L, CLS first, PAD tail
  std::vector<uint8_t> attention_mask; // 1 = real token
  std::vector<uint8_t> global_mask;    // 1 = global attention position
  size_t true_length = 0;

  friend bool operator==(const EncodedFunction&, const EncodedFunction&) = default;
};

template <typename Record>
EncodedFunction encode(const Record& fn, const Vocabulary& v, size_t max_len,
                       const GlobalAttentionPolicy& policy = {}) {
  if (max_len < 2) throw ContractError("model input length must be at least 2");
  EncodedFunction out;
  out.label = fn.label;
  out.ids.assign(max_len, kPadId);
  out.attention_mask.assign(max_len, 0);
  out.global_mask.assign(max_len, 0);

  auto tokens = split_tokens(fn.body);
  if (fn.body.empty()) tokens.clear();
  size_t kept = std::min(tokens.size(), max_len - 1);
  out.ids[0] = kClsId;
  for (size_t i = 0; i < kept; ++i) out.ids[i + 1] = v.id_of(tokens[i]);
  out.true_length = kept + 1;
  for (size_t i = 0; i < out.true_length; ++i) {
    out.attention_mask[i] = 1;
    if (policy.is_global(i)) out.global_mask[i] = 1;
  }
  return out;
}

// Recovers the surviving body tokens (CLS and padding dropped). Out-of-vocab
// tokens come back as <UNK>.
inline std::vector<std::string> decode(const EncodedFunction& fn, const Vocabulary& v) {
  std::vector<std::string> out;
  for (size_t i = 1; i < fn.true_length; ++i) out.push_back(v.token_of(fn.ids[i]));
  return out;
}

}  // namespace faser
