#pragma once

// Exact in-memory cosine-similarity retrieval over multimodal document
// embeddings. Top-k is a full scan: at this scale exactness beats any
// index, and results are bit-deterministic (ties broken by ascending
// doc_id).

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jetr/enhancer.hpp"
#include "jetr/linalg.hpp"

namespace jetr {

enum class Modality { Text, Image };

std::string to_string(Modality m);
Modality modality_from_string(std::string_view s);

struct DocRecord {
  std::string doc_id;
  Modality modality = Modality::Text;
  std::string lesson_id;
  Vector embedding;  // norm > 0, uniform dim across the store
};

struct RankedEntry {
  std::string doc_id;
  double raw_cosine = 0.0;
  std::optional<double> enhanced_score;  // set when ranked by the enhancer
  std::optional<double> report_score;    // enhanced_score + 1, in [0, 2]
};

// Sorted by the active score descending, doc_id ascending on ties.
using RankedList = std::vector<RankedEntry>;

class VectorStore {
 public:
  // Rejects duplicate ids, dim mismatches, and zero-norm embeddings.
  void insert(DocRecord rec);

  bool contains(const std::string& doc_id) const;
  const DocRecord& doc(const std::string& doc_id) const;

  std::size_t size() const noexcept { return docs_.size(); }
  std::size_t count(Modality m) const noexcept;
  // 0 while the store is empty.
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<DocRecord>& docs() const noexcept { return docs_; }

  // The k highest-scoring documents, exact by full scan. Raw scoring when
  // `enhancer` is null, enhanced cosine otherwise (raw cosine is reported
  // either way). Returns fewer than k entries when the (filtered) store is
  // smaller; an empty filtered store is an error.
  RankedList topk(const Vector& query_emb, std::size_t k,
                  std::optional<Modality> modality_filter = std::nullopt,
                  const EnhancerParams* enhancer = nullptr) const;

 private:
  std::vector<DocRecord> docs_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

}  // namespace jetr
