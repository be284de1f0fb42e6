#pragma once

// Persistent embedding store with exact top-k cosine search, magic "FASX".
//
// Layout (little-endian):
//   "FASX"  u32 version  u32 dim  u64 count  u64 checkpoint_fingerprint
//   per row: 16-byte record id (lo, hi as u64), label (u32 len + bytes),
//            u64 meta digest, dim × f32 embedding
//
// Rows are sorted by record id, so the file content is independent of the
// corpus order the store was built from.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "faser/binio.hpp"
#include "faser/checkpoint.hpp"
#include "faser/encoder.hpp"
#include "faser/hash.hpp"
#include "faser/parallel.hpp"
#include "faser/types.hpp"
#include "faser/vocab.hpp"

namespace faser {

inline constexpr uint32_t kStoreVersion = 1;

struct StoreRow {
  Digest128 id;
  std::string label;
  uint64_t meta_digest = 0;
  std::vector<float> embedding;

  friend bool operator==(const StoreRow&, const StoreRow&) = default;
};

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(uint32_t dim, uint64_t fingerprint) : dim_(dim), fingerprint_(fingerprint) {}

  uint32_t dim() const { return dim_; }
  uint64_t fingerprint() const { return fingerprint_; }
  size_t count() const { return rows_.size(); }
  const std::vector<StoreRow>& rows() const { return rows_; }

  void add(StoreRow row) {
    if (row.embedding.size() != dim_) throw ContractError("store row dimension mismatch");
    rows_.push_back(std::move(row));
  }

  // Sorts by id and enforces the store invariants (unique ids, unit rows).
  void finalize() {
    std::sort(rows_.begin(), rows_.end(),
              [](const StoreRow& a, const StoreRow& b) { return a.id < b.id; });
    for (size_t i = 1; i < rows_.size(); ++i)
      if (rows_[i].id == rows_[i - 1].id)
        throw ContractError("duplicate record id in embedding store (label \"" +
                            rows_[i].label + "\")");
    for (const auto& r : rows_) check_unit_norm(r);
  }

  struct Hit {
    Digest128 id;
    size_t row = 0;
    float similarity = 0;
  };

  // Exact k-largest cosines, descending, ties stable in row (id) order.
  std::vector<Hit> top_k(const std::vector<float>& query, size_t k) const {
    if (k < 1) throw ContractError("top_k: k must be >= 1");
    if (query.size() != dim_) throw ContractError("top_k: query dimension mismatch");
    std::vector<Hit> hits;
    hits.reserve(rows_.size());
    for (size_t i = 0; i < rows_.size(); ++i) {
      double dot = 0;
      for (size_t c = 0; c < dim_; ++c) dot += double(query[c]) * rows_[i].embedding[c];
      hits.push_back({rows_[i].id, i, static_cast<float>(dot)});
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const Hit& a, const Hit& b) { return a.similarity > b.similarity; });
    if (hits.size() > k) hits.resize(k);
    return hits;
  }

  void save(std::ostream& out) const {
    out.write("FASX", 4);
    binio::write_u32(out, kStoreVersion);
    binio::write_u32(out, dim_);
    binio::write_u64(out, rows_.size());
    binio::write_u64(out, fingerprint_);
    for (const auto& r : rows_) {
      binio::write_u64(out, r.id.lo);
      binio::write_u64(out, r.id.hi);
      binio::write_string(out, r.label);
      binio::write_u64(out, r.meta_digest);
      binio::write_f32_array(out, r.embedding.data(), r.embedding.size());
    }
    if (!out) throw ContractError("embedding store write failed");
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot open store for writing: " + path);
    save(out);
  }

  static EmbeddingStore load(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "FASX")
      throw ContractError("not an embedding store (bad magic)");
    uint32_t version = binio::read_u32(in);
    if (version != kStoreVersion)
      throw ContractError("unsupported store version " + std::to_string(version));
    EmbeddingStore st;
    st.dim_ = binio::read_u32(in);
    uint64_t count = binio::read_u64(in);
    st.fingerprint_ = binio::read_u64(in);
    st.rows_.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
      StoreRow r;
      r.id.lo = binio::read_u64(in);
      r.id.hi = binio::read_u64(in);
      r.label = binio::read_string(in);
      r.meta_digest = binio::read_u64(in);
      r.embedding.resize(st.dim_);
      binio::read_f32_array(in, r.embedding.data(), st.dim_);
      if (i > 0 && !(st.rows_.back().id < r.id))
        throw ContractError("embedding store rows out of order");
      check_unit_norm(r);
      st.rows_.push_back(std::move(r));
    }
    return st;
  }

  static EmbeddingStore load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open store: " + path);
    return load(in);
  }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  static void check_unit_norm(const StoreRow& r) {
    double ss = 0;
    for (float v : r.embedding) ss += double(v) * v;
    if (std::abs(std::sqrt(ss) - 1.0) > 1e-4)
      throw ContractError("store row for \"" + r.label + "\" is not unit-norm");
  }

  uint32_t dim_ = 0;
  uint64_t fingerprint_ = 0;
  std::vector<StoreRow> rows_;  // sorted by id after finalize()/load()
};

namespace detail {

inline std::string provenance_key(const Provenance& p) {
  std::string s;
  s += p.binary_id;
  s += '\0';
  s += p.architecture;
  s += '\0';
  s += std::to_string(p.bitness);
  s += '\0';
  s += p.compiler;
  s += '\0';
  s += p.opt_level;
  return s;
}

}  // namespace detail

// Stable content identity for a record: label, body, provenance, plus an
// occurrence counter so even exact duplicates get distinct ids.
template <typename Record>
std::vector<Digest128> record_ids(const std::vector<Record>& corpus) {
  std::unordered_map<Digest128, uint64_t, Digest128Hasher> occurrence;
  std::vector<Digest128> ids;
  ids.reserve(corpus.size());
  for (const auto& rec : corpus) {
    std::string key;
    key += rec.label;
    key += '\0';
    key += rec.body;
    key += '\0';
    key += detail::provenance_key(rec.meta);
    Digest128 base = murmur3_128(key.data(), key.size());
    uint64_t n = occurrence[base]++;
    key += '\0';
    key += std::to_string(n);
    ids.push_back(murmur3_128(key.data(), key.size()));
  }
  return ids;
}

// Embeds every record and assembles the sorted store. Each function embeds on
// its own tape, so the result is identical for any batch size, corpus order
// or thread count.
template <typename Record>
EmbeddingStore build_index(const std::vector<Record>& corpus, const Encoder& encoder,
                           const Vocabulary& vocab, const GlobalAttentionPolicy& policy,
                           size_t threads = 1) {
  if (encoder.config().vocab_size != vocab.size())
    throw ContractError("checkpoint vocab_size " + std::to_string(encoder.config().vocab_size) +
                        " does not match vocabulary of " + std::to_string(vocab.size()) +
                        " tokens");
  uint64_t fp = checkpoint_fingerprint(encoder.config(), encoder.parameters());
  EmbeddingStore store(encoder.config().embed_dim, fp);
  auto ids = record_ids(corpus);
  std::vector<StoreRow> rows(corpus.size());
  parallel_for(corpus.size(), threads, [&](size_t i) {
    EncodedFunction enc = encode(corpus[i], vocab, encoder.config().input_len, policy);
    StoreRow& r = rows[i];
    r.id = ids[i];
    r.label = corpus[i].label;
    std::string meta_key = detail::provenance_key(corpus[i].meta);
    r.meta_digest = murmur3_128(meta_key.data(), meta_key.size()).lo;
    r.embedding = encoder.embed(enc);
  });
  for (auto& r : rows) store.add(std::move(r));
  store.finalize();
  return store;
}

}  // namespace faser
