#pragma once

// Two-stage corpus reduction.
//
// Stage 1 drops exact duplicates: records whose (label, body) pair has been
// seen before. Keyed by a 128-bit hash of body + '\0' + label; on the
// (unlikely) digest collision the stored strings are compared so distinct
// pairs are never merged.
//
// Stage 2 drops singleton labels: labels that survive stage 1 with only one
// distinct body carry no pairing signal for metric training and are removed.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "faser/hash.hpp"
#include "faser/types.hpp"

namespace faser {

struct DedupReport {
  size_t input_count = 0;
  size_t after_exact = 0;
  size_t after_prune = 0;
  size_t exact_removed = 0;
  size_t singleton_labels_removed = 0;

  friend bool operator==(const DedupReport&, const DedupReport&) = default;
};

inline nlohmann::ordered_json to_json(const DedupReport& r) {
  return nlohmann::ordered_json{{"input_count", r.input_count},
                                {"after_exact", r.after_exact},
                                {"after_prune", r.after_prune},
                                {"exact_removed", r.exact_removed},
                                {"singleton_labels_removed", r.singleton_labels_removed}};
}

namespace detail {

inline Digest128 dedup_key(const std::string& label, const std::string& body) {
  std::string buf;
  buf.reserve(body.size() + 1 + label.size());
  buf += body;
  buf += '\0';
  buf += label;
  return murmur3_128(buf.data(), buf.size());
}

}  // namespace detail

// Keeps the first occurrence of every distinct (label, body) pair, preserving
// input order.
template <typename Record>
std::vector<Record> dedup_exact(const std::vector<Record>& in, DedupReport* report = nullptr) {
  std::vector<Record> out;
  out.reserve(in.size());
  // digest -> indices into `out` sharing that digest (collision chain)
  std::unordered_map<Digest128, std::vector<size_t>, Digest128Hasher> seen;
  for (const auto& rec : in) {
    Digest128 key = detail::dedup_key(rec.label, rec.body);
    auto& chain = seen[key];
    bool dup = false;
    for (size_t idx : chain) {
      if (out[idx].label == rec.label && out[idx].body == rec.body) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    chain.push_back(out.size());
    out.push_back(rec);
  }
  if (report) {
    report->input_count = in.size();
    report->after_exact = out.size();
    report->exact_removed = in.size() - out.size();
  }
  return out;
}

// Removes every record whose label has only one distinct body in `in`.
template <typename Record>
std::vector<Record> prune_singletons(const std::vector<Record>& in, DedupReport* report = nullptr) {
  // label -> distinct body digests (size 2 is enough to decide)
  std::unordered_map<std::string, std::vector<Digest128>> bodies;
  for (const auto& rec : in) {
    auto& seen = bodies[rec.label];
    if (seen.size() >= 2) continue;
    Digest128 d = murmur3_128(rec.body.data(), rec.body.size());
    if (seen.empty() || !(seen[0] == d)) seen.push_back(d);
  }
  size_t singleton_labels = 0;
  for (const auto& [label, seen] : bodies)
    if (seen.size() < 2) ++singleton_labels;
  std::vector<Record> out;
  out.reserve(in.size());
  for (const auto& rec : in)
    if (bodies[rec.label].size() >= 2) out.push_back(rec);
  if (report) {
    report->after_prune = out.size();
    report->singleton_labels_removed = singleton_labels;
  }
  return out;
}

template <typename Record>
std::vector<Record> dedup_corpus(const std::vector<Record>& in, DedupReport& report) {
  auto exact = dedup_exact(in, &report);
  return prune_singletons(exact, &report);
}

}  // namespace faser
