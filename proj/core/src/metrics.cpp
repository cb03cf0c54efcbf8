#include "jetr/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace jetr {

namespace {

void require_nonempty_judgment(const QueryJudgment& judgment,
                               const char* op) {
  if (judgment.relevant_doc_ids.empty()) {
    fail(ErrorKind::EmptyInput,
         std::string(op) + ": empty judgment for query '" +
             judgment.query_id + "'");
  }
}

std::size_t relevant_in_top_k(const RankedList& ranked,
                              const QueryJudgment& judgment, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t cut = std::min(k, ranked.size());
  for (std::size_t r = 0; r < cut; ++r) {
    if (judgment.relevant_doc_ids.contains(ranked[r].doc_id)) ++hits;
  }
  return hits;
}

}  // namespace

double reciprocal_rank(const RankedList& ranked,
                       const QueryJudgment& judgment) {
  if (ranked.empty()) {
    fail(ErrorKind::EmptyInput, "reciprocal_rank: empty ranking");
  }
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (judgment.relevant_doc_ids.contains(ranked[r].doc_id)) {
      return 1.0 / static_cast<double>(r + 1);
    }
  }
  return 0.0;
}

double average_precision(const RankedList& ranked,
                         const QueryJudgment& judgment) {
  require_nonempty_judgment(judgment, "average_precision");
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (judgment.relevant_doc_ids.contains(ranked[r].doc_id)) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(judgment.relevant_doc_ids.size());
}

double ndcg_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                 std::size_t k) {
  require_nonempty_judgment(judgment, "ndcg_at_k");
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "ndcg_at_k: k must be >= 1");
  }
  double dcg = 0.0;
  const std::size_t cut = std::min(k, ranked.size());
  for (std::size_t r = 0; r < cut; ++r) {
    if (judgment.relevant_doc_ids.contains(ranked[r].doc_id)) {
      dcg += 1.0 / std::log2(static_cast<double>(r + 2));
    }
  }
  double ideal = 0.0;
  const std::size_t ideal_hits =
      std::min(judgment.relevant_doc_ids.size(), k);
  for (std::size_t r = 0; r < ideal_hits; ++r) {
    ideal += 1.0 / std::log2(static_cast<double>(r + 2));
  }
  return dcg / ideal;
}

double recall_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                   std::size_t k) {
  require_nonempty_judgment(judgment, "recall_at_k");
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "recall_at_k: k must be >= 1");
  }
  return static_cast<double>(relevant_in_top_k(ranked, judgment, k)) /
         static_cast<double>(judgment.relevant_doc_ids.size());
}

double precision_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                      std::size_t k) {
  require_nonempty_judgment(judgment, "precision_at_k");
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "precision_at_k: k must be >= 1");
  }
  return static_cast<double>(relevant_in_top_k(ranked, judgment, k)) /
         static_cast<double>(k);
}

double f1_at_k(const RankedList& ranked, const QueryJudgment& judgment,
               std::size_t k) {
  const double p = precision_at_k(ranked, judgment, k);
  const double r = recall_at_k(ranked, judgment, k);
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

double hit_rate_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                     std::size_t k) {
  require_nonempty_judgment(judgment, "hit_rate_at_k");
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "hit_rate_at_k: k must be >= 1");
  }
  return relevant_in_top_k(ranked, judgment, k) > 0 ? 1.0 : 0.0;
}

double mean_cosine(const RankedList& ranked, std::size_t k) {
  if (ranked.empty()) {
    fail(ErrorKind::EmptyInput, "mean_cosine: empty ranking");
  }
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "mean_cosine: k must be >= 1");
  }
  const std::size_t cut = std::min(k, ranked.size());
  double sum = 0.0;
  for (std::size_t r = 0; r < cut; ++r) {
    sum += ranked[r].raw_cosine;
  }
  return sum / static_cast<double>(cut);
}

MetricsReport per_query_report(const RankedList& ranked,
                               const QueryJudgment& judgment, std::size_t k) {
  MetricsReport rep;
  rep.k = k;
  rep.query_count = 1;
  rep.mrr = reciprocal_rank(ranked, judgment);
  rep.map = average_precision(ranked, judgment);
  rep.ndcg_at_k = ndcg_at_k(ranked, judgment, k);
  rep.recall_at_k = recall_at_k(ranked, judgment, k);
  rep.precision_at_k = precision_at_k(ranked, judgment, k);
  rep.f1_at_k = f1_at_k(ranked, judgment, k);
  rep.hit_rate_at_k = hit_rate_at_k(ranked, judgment, k);
  rep.mean_cosine = mean_cosine(ranked, k);
  return rep;
}

MetricsReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) {
    fail(ErrorKind::EmptyInput, "aggregate: no reports");
  }
  MetricsReport out;
  out.k = reports.front().k;
  for (const MetricsReport& r : reports) {
    if (r.k != out.k) {
      fail(ErrorKind::InvalidArgument, "aggregate: mixed k values");
    }
    out.mrr += r.mrr;
    out.map += r.map;
    out.ndcg_at_k += r.ndcg_at_k;
    out.recall_at_k += r.recall_at_k;
    out.precision_at_k += r.precision_at_k;
    out.f1_at_k += r.f1_at_k;
    out.hit_rate_at_k += r.hit_rate_at_k;
    out.mean_cosine += r.mean_cosine;
    out.query_count += r.query_count;
  }
  const double n = static_cast<double>(reports.size());
  out.mrr /= n;
  out.map /= n;
  out.ndcg_at_k /= n;
  out.recall_at_k /= n;
  out.precision_at_k /= n;
  out.f1_at_k /= n;
  out.hit_rate_at_k /= n;
  out.mean_cosine /= n;
  return out;
}

std::string report_to_json(const MetricsReport& report) {
  const std::string k = std::to_string(report.k);
  nlohmann::ordered_json j;
  j["mrr"] = report.mrr;
  j["map"] = report.map;
  j["ndcg_at_" + k] = report.ndcg_at_k;
  j["recall_at_" + k] = report.recall_at_k;
  j["precision_at_" + k] = report.precision_at_k;
  j["f1_at_" + k] = report.f1_at_k;
  j["hit_rate_at_" + k] = report.hit_rate_at_k;
  j["mean_cosine"] = report.mean_cosine;
  j["k"] = report.k;
  j["query_count"] = report.query_count;
  return j.dump(2);
}

}  // namespace jetr
