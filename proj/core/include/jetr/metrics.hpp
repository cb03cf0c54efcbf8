#pragma once

// Ranked-retrieval effectiveness metrics with binary relevance: MRR, MAP,
// nDCG@k, Recall@k, Precision@k, F1@k, Hit Rate@k, and mean raw cosine of
// the top k. MRR and MAP run over the full ranking; the @k family cuts at
// k.

#include <set>
#include <span>
#include <string>

#include "jetr/vector_store.hpp"

namespace jetr {

struct QueryJudgment {
  std::string query_id;
  std::set<std::string> relevant_doc_ids;
};

struct MetricsReport {
  double mrr = 0.0;
  double map = 0.0;
  double ndcg_at_k = 0.0;
  double recall_at_k = 0.0;
  double precision_at_k = 0.0;
  double f1_at_k = 0.0;
  double hit_rate_at_k = 0.0;
  double mean_cosine = 0.0;
  std::size_t k = 10;
  std::size_t query_count = 0;
};

// 1/rank of the first relevant document over the full ranking, 0 if none.
double reciprocal_rank(const RankedList& ranked, const QueryJudgment& judgment);

// Sum of precision-at-rank over retrieved relevant documents, divided by
// |relevant|. Relevant documents missing from the ranking contribute 0.
double average_precision(const RankedList& ranked,
                         const QueryJudgment& judgment);

// Binary gains: DCG = sum over relevant ranks r <= k of 1/log2(r + 1),
// normalized by the ideal DCG with min(|relevant|, k) relevant in front.
double ndcg_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                 std::size_t k);

double recall_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                   std::size_t k);
double precision_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                      std::size_t k);
// Harmonic mean of precision@k and recall@k; 0 when both are 0.
double f1_at_k(const RankedList& ranked, const QueryJudgment& judgment,
               std::size_t k);
double hit_rate_at_k(const RankedList& ranked, const QueryJudgment& judgment,
                     std::size_t k);

// Mean raw cosine between the query and its top-k entries (mean over the
// available entries when the ranking is shorter than k).
double mean_cosine(const RankedList& ranked, std::size_t k);

// All metrics for one query at cutoff k (query_count = 1).
MetricsReport per_query_report(const RankedList& ranked,
                               const QueryJudgment& judgment, std::size_t k);

// Unweighted arithmetic mean per field; every input must share the same k.
MetricsReport aggregate(std::span<const MetricsReport> reports);

// JSON object with the report's fields; the @k names carry the numeric
// cutoff (e.g. "ndcg_at_10").
std::string report_to_json(const MetricsReport& report);

}  // namespace jetr
