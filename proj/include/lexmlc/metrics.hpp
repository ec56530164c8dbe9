#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexmlc/common.hpp"

namespace lexmlc {

// One scored document: a probability per label plus the gold label set.
struct PredictionRow {
  std::string celex_id;
  std::vector<double> scores;       // [0,1]^L
  std::set<std::size_t> gold;       // label indices < L
};

struct EvalReport {
  std::string language;
  std::size_t n_docs = 0;
  double micro_f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::map<int, double> rp_at;
  std::map<int, double> ndcg_at;
  double threshold = 0.5;
};

namespace detail {

// Label indices ordered by descending score; ties broken by ascending index
// so rankings are reproducible across platforms.
inline std::vector<std::size_t> ranked_labels(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

inline double log2_discount(std::size_t rank_one_based) {
  return std::log2(static_cast<double>(rank_one_based) + 1.0);
}

}  // namespace detail

struct MicroF1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged precision/recall/F1 over all (document, label) pairs. A
// label is selected when its score >= threshold; an empty selected set
// yields precision 0 by convention.
inline MicroF1Result micro_f1(const std::vector<PredictionRow>& rows,
                              double threshold = 0.5) {
  require(!rows.empty(), "micro_f1: rows must be nonempty");
  require(threshold >= 0.0 && threshold <= 1.0,
          "micro_f1: threshold must be in [0,1], got ", threshold);
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (const PredictionRow& row : rows) {
    for (std::size_t j = 0; j < row.scores.size(); ++j) {
      const bool selected = row.scores[j] >= threshold;
      const bool relevant = row.gold.count(j) > 0;
      if (selected && relevant) ++tp;
      else if (selected) ++fp;
      else if (relevant) ++fn;
    }
  }
  MicroF1Result r;
  r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// R-Precision@K: per document, the fraction of the top min(K, |gold|)
// ranked labels that are relevant. Documents with empty gold are skipped.
inline double rp_at_k(const std::vector<PredictionRow>& rows, int k) {
  require(k >= 1, "rp_at_k: K must be >= 1, got ", k);
  double sum = 0.0;
  std::size_t counted = 0;
  for (const PredictionRow& row : rows) {
    if (row.gold.empty()) continue;
    const std::size_t r =
        std::min<std::size_t>(static_cast<std::size_t>(k), row.gold.size());
    const std::vector<std::size_t> order = detail::ranked_labels(row.scores);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < r && i < order.size(); ++i) {
      if (row.gold.count(order[i]) > 0) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(r);
    ++counted;
  }
  require(counted > 0, "rp_at_k: every document has an empty gold set");
  return sum / static_cast<double>(counted);
}

// nDCG@K with binary gains. DCG sums rel_i / log2(i+1) over the top K
// ranks; the ideal DCG places all relevant labels first. Empty-gold
// documents are skipped (their ideal DCG is undefined).
inline double ndcg_at_k(const std::vector<PredictionRow>& rows, int k) {
  require(k >= 1, "ndcg_at_k: K must be >= 1, got ", k);
  double sum = 0.0;
  std::size_t counted = 0;
  for (const PredictionRow& row : rows) {
    if (row.gold.empty()) continue;
    const std::vector<std::size_t> order = detail::ranked_labels(row.scores);
    double dcg = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(k) && i < order.size(); ++i) {
      if (row.gold.count(order[i]) > 0) {
        dcg += 1.0 / detail::log2_discount(i + 1);
      }
    }
    double idcg = 0.0;
    const std::size_t ideal =
        std::min<std::size_t>(static_cast<std::size_t>(k), row.gold.size());
    for (std::size_t i = 0; i < ideal; ++i) {
      idcg += 1.0 / detail::log2_discount(i + 1);
    }
    sum += dcg / idcg;
    ++counted;
  }
  require(counted > 0, "ndcg_at_k: every document has an empty gold set");
  return sum / static_cast<double>(counted);
}

// 100 * (treatment - baseline) / baseline.
inline double relative_improvement(double baseline, double treatment) {
  require(baseline > 0.0, "relative_improvement: baseline must be > 0, got ",
          baseline);
  return 100.0 * (treatment - baseline) / baseline;
}

// Machine-readable record: field-for-field JSON image of EvalReport.
inline std::string serialize_report(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["language"] = r.language;
  j["n_docs"] = r.n_docs;
  j["micro_f1"] = r.micro_f1;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["rp_at"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.rp_at) j["rp_at"][std::to_string(k)] = v;
  j["ndcg_at"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.ndcg_at) j["ndcg_at"][std::to_string(k)] = v;
  j["threshold"] = r.threshold;
  return j.dump(2) + "\n";
}

inline EvalReport make_report(const std::string& language,
                              const std::vector<PredictionRow>& rows,
                              const std::vector<int>& ks,
                              double threshold = 0.5) {
  EvalReport report;
  report.language = language;
  report.n_docs = rows.size();
  report.threshold = threshold;
  const MicroF1Result f1 = micro_f1(rows, threshold);
  report.micro_f1 = f1.f1;
  report.precision = f1.precision;
  report.recall = f1.recall;
  for (int k : ks) {
    report.rp_at[k] = rp_at_k(rows, k);
    report.ndcg_at[k] = ndcg_at_k(rows, k);
  }
  return report;
}

}  // namespace lexmlc
