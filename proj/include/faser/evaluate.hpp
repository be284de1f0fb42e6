#pragma once

// Retrieval evaluation. A search pool is one query, one positive (same label,
// different record) and N negatives drawn from N distinct other labels.
// Candidates keep a stable base order (positive first, then negatives), ranks
// come from descending cosine with stable tie-breaking, and the summary
// reports Recall@1, MRR@10 and mean/median rank (midpoint for even counts).

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "faser/tensor.hpp"
#include "faser/types.hpp"

namespace faser {

struct SearchPool {
  size_t query = 0;                // corpus record index
  size_t positive = 0;             // same label as query, different record
  std::vector<size_t> negatives;   // one record from each of N distinct labels
};

struct RankResult {
  size_t pool_id = 0;
  std::vector<size_t> ranked;      // candidate record indices, best first
  size_t rank_of_positive = 0;     // 1-based
};

struct EvalSummary {
  double recall_at_1 = 0;
  double mrr_at_10 = 0;
  double mean_rank = 0;
  double median_rank = 0;
  std::vector<size_t> ranks;
};

// Uniform pool sampling without replacement inside each pool; queries may be
// restricted (zero-shot) via `query_eligible`. Pool members carry no
// architecture/compiler/optimization constraint.
inline std::vector<SearchPool> build_pools(const std::vector<std::string>& labels,
                                           size_t num_pools, size_t num_negatives, uint64_t seed,
                                           const std::vector<uint8_t>* query_eligible = nullptr) {
  if (num_negatives == 0) throw ContractError("build_pools: need at least 1 negative");
  std::unordered_map<std::string, std::vector<size_t>> by_label;
  for (size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  if (by_label.size() < num_negatives + 1)
    throw ContractError("build_pools: need " + std::to_string(num_negatives + 1) +
                        " labels, corpus has " + std::to_string(by_label.size()));

  // Deterministic label ordering (first appearance) for reproducible draws.
  std::vector<std::string> label_order;
  {
    std::set<std::string> seen;
    for (const auto& l : labels)
      if (seen.insert(l).second) label_order.push_back(l);
  }

  std::vector<size_t> eligible_queries;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (by_label[labels[i]].size() < 2) continue;
    if (query_eligible && !(*query_eligible)[i]) continue;
    eligible_queries.push_back(i);
  }
  if (eligible_queries.empty())
    throw ContractError("build_pools: no eligible query has a same-label positive");

  std::mt19937 rng(static_cast<uint32_t>(seed ^ (seed >> 32)));
  std::vector<SearchPool> pools;
  pools.reserve(num_pools);
  std::vector<size_t> other_labels;
  for (size_t p = 0; p < num_pools; ++p) {
    SearchPool pool;
    pool.query = eligible_queries[std::uniform_int_distribution<size_t>(
        0, eligible_queries.size() - 1)(rng)];
    std::vector<size_t> mates;
    for (size_t m : by_label[labels[pool.query]])
      if (m != pool.query) mates.push_back(m);
    pool.positive = mates[std::uniform_int_distribution<size_t>(0, mates.size() - 1)(rng)];

    other_labels.clear();
    for (size_t l = 0; l < label_order.size(); ++l)
      if (label_order[l] != labels[pool.query]) other_labels.push_back(l);
    // Partial Fisher-Yates: first num_negatives entries are the drawn labels.
    for (size_t i = 0; i < num_negatives; ++i) {
      std::uniform_int_distribution<size_t> dist(i, other_labels.size() - 1);
      std::swap(other_labels[i], other_labels[dist(rng)]);
      const auto& members = by_label[label_order[other_labels[i]]];
      pool.negatives.push_back(
          members[std::uniform_int_distribution<size_t>(0, members.size() - 1)(rng)]);
    }
    pools.push_back(std::move(pool));
  }
  return pools;
}

// `embeddings` holds one unit-norm row per corpus record.
inline RankResult rank_pool(const SearchPool& pool, const Tensor& embeddings, size_t pool_id) {
  std::vector<size_t> candidates;
  candidates.reserve(pool.negatives.size() + 1);
  candidates.push_back(pool.positive);
  candidates.insert(candidates.end(), pool.negatives.begin(), pool.negatives.end());

  const float* q = embeddings.row(pool.query);
  std::vector<float> sims(candidates.size());
  for (size_t c = 0; c < candidates.size(); ++c) {
    const float* e = embeddings.row(candidates[c]);
    double dot = 0;
    for (size_t k = 0; k < embeddings.cols; ++k) dot += double(q[k]) * e[k];
    sims[c] = static_cast<float>(dot);
  }
  std::vector<size_t> order(candidates.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&sims](size_t a, size_t b) { return sims[a] > sims[b]; });

  RankResult r;
  r.pool_id = pool_id;
  r.ranked.reserve(order.size());
  for (size_t i = 0; i < order.size(); ++i) {
    r.ranked.push_back(candidates[order[i]]);
    if (order[i] == 0) r.rank_of_positive = i + 1;
  }
  return r;
}

inline EvalSummary summarize_ranks(const std::vector<size_t>& ranks) {
  if (ranks.empty()) throw ContractError("summarize: no results");
  EvalSummary s;
  s.ranks = ranks;
  double sum = 0;
  size_t hits = 0;
  double mrr = 0;
  for (size_t r : ranks) {
    if (r == 1) ++hits;
    if (r <= 10) mrr += 1.0 / double(r);
    sum += double(r);
  }
  s.recall_at_1 = double(hits) / double(ranks.size());
  s.mrr_at_10 = mrr / double(ranks.size());
  s.mean_rank = sum / double(ranks.size());
  std::vector<size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  s.median_rank = n % 2 == 1 ? double(sorted[n / 2])
                             : (double(sorted[n / 2 - 1]) + double(sorted[n / 2])) / 2.0;
  return s;
}

inline EvalSummary summarize(const std::vector<RankResult>& results) {
  std::vector<size_t> ranks;
  ranks.reserve(results.size());
  for (const auto& r : results) ranks.push_back(r.rank_of_positive);
  return summarize_ranks(ranks);
}

// One vulnerability query ranked against a whole target corpus. `rank` is the
// position of the first same-label target; absent labels are surfaced, not
// dropped silently.
struct VulnResult {
  std::string query_label;
  std::string architecture;  // of the query
  bool absent = false;
  size_t rank = 0;           // 1-based; 0 when absent
};

inline std::vector<VulnResult> vuln_search(const std::vector<std::string>& query_labels,
                                           const std::vector<std::string>& query_archs,
                                           const Tensor& query_embeddings,
                                           const std::vector<std::string>& target_labels,
                                           const Tensor& target_embeddings) {
  if (target_labels.empty()) throw ContractError("vuln_search: empty target corpus");
  if (query_labels.size() != query_embeddings.rows ||
      target_labels.size() != target_embeddings.rows ||
      query_embeddings.cols != target_embeddings.cols)
    throw ContractError("vuln_search: embedding shape mismatch");

  std::vector<VulnResult> out;
  out.reserve(query_labels.size());
  std::vector<size_t> order(target_labels.size());
  std::vector<float> sims(target_labels.size());
  for (size_t qi = 0; qi < query_labels.size(); ++qi) {
    VulnResult r;
    r.query_label = query_labels[qi];
    r.architecture = qi < query_archs.size() ? query_archs[qi] : "";
    const float* q = query_embeddings.row(qi);
    for (size_t t = 0; t < target_labels.size(); ++t) {
      const float* e = target_embeddings.row(t);
      double dot = 0;
      for (size_t k = 0; k < target_embeddings.cols; ++k) dot += double(q[k]) * e[k];
      sims[t] = static_cast<float>(dot);
    }
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&sims](size_t a, size_t b) { return sims[a] > sims[b]; });
    r.absent = true;
    for (size_t pos = 0; pos < order.size(); ++pos) {
      if (target_labels[order[pos]] == r.query_label) {
        r.absent = false;
        r.rank = pos + 1;
        break;
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Mean/median over the present queries only.
inline EvalSummary summarize_vuln(const std::vector<VulnResult>& results) {
  std::vector<size_t> ranks;
  for (const auto& r : results)
    if (!r.absent) ranks.push_back(r.rank);
  return summarize_ranks(ranks);
}

// Colon-joined per-query ranks grouped by query architecture, one line per
// architecture in first-appearance order.
inline std::string vuln_rank_table(const std::vector<VulnResult>& results) {
  std::vector<std::string> archs;
  std::unordered_map<std::string, std::string> rows;
  for (const auto& r : results) {
    auto [it, fresh] = rows.try_emplace(r.architecture);
    if (fresh) archs.push_back(r.architecture);
    if (!it->second.empty()) it->second += ':';
    it->second += r.absent ? "absent" : std::to_string(r.rank);
  }
  std::string out;
  for (const auto& a : archs) {
    out += a;
    out += ' ';
    out += rows[a];
    out += '\n';
  }
  return out;
}

// Contamination guard for the zero-shot harness: the held-out architecture
// must not occur in the training corpus and must occur in the eval corpus.
inline void check_zero_shot_split(const std::vector<std::string>& training_archs,
                                  const std::vector<std::string>& eval_archs,
                                  const std::string& holdout) {
  for (const auto& a : training_archs)
    if (a == holdout)
      throw ContractError("zero-shot: held-out architecture \"" + holdout +
                          "\" occurs in the training corpus");
  bool present = false;
  for (const auto& a : eval_archs)
    if (a == holdout) present = true;
  if (!present)
    throw ContractError("zero-shot: held-out architecture \"" + holdout +
                        "\" has no functions in the eval corpus");
}

// Pool evaluation restricted to queries from the held-out architecture.
inline std::vector<SearchPool> build_zero_shot_pools(const std::vector<std::string>& labels,
                                                     const std::vector<std::string>& archs,
                                                     const std::string& holdout,
                                                     size_t num_pools, size_t num_negatives,
                                                     uint64_t seed) {
  std::vector<uint8_t> eligible(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) eligible[i] = archs[i] == holdout ? 1 : 0;
  return build_pools(labels, num_pools, num_negatives, seed, &eligible);
}

}  // namespace faser
