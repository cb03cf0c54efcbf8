#include "jetr/vector_store.hpp"

#include <algorithm>

#include "jetr/losses.hpp"

namespace jetr {

std::string to_string(Modality m) {
  return m == Modality::Text ? "text" : "image";
}

Modality modality_from_string(std::string_view s) {
  if (s == "text") return Modality::Text;
  if (s == "image") return Modality::Image;
  fail(ErrorKind::InvalidArgument,
       "unknown modality '" + std::string(s) + "'");
}

void VectorStore::insert(DocRecord rec) {
  if (index_.contains(rec.doc_id)) {
    fail(ErrorKind::DuplicateId, "duplicate doc_id '" + rec.doc_id + "'");
  }
  if (dim_ != 0 && rec.embedding.size() != dim_) {
    fail(ErrorKind::DimMismatch,
         "doc '" + rec.doc_id + "' has dim " +
             std::to_string(rec.embedding.size()) + ", store has " +
             std::to_string(dim_));
  }
  if (rec.embedding.empty() || l2_norm(rec.embedding) == 0.0) {
    fail(ErrorKind::InvalidArgument,
         "doc '" + rec.doc_id + "' has a zero-norm embedding");
  }
  if (dim_ == 0) dim_ = rec.embedding.size();
  index_.emplace(rec.doc_id, docs_.size());
  docs_.push_back(std::move(rec));
}

bool VectorStore::contains(const std::string& doc_id) const {
  return index_.contains(doc_id);
}

const DocRecord& VectorStore::doc(const std::string& doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) {
    fail(ErrorKind::NotFound, "unknown doc_id '" + doc_id + "'");
  }
  return docs_[it->second];
}

std::size_t VectorStore::count(Modality m) const noexcept {
  std::size_t n = 0;
  for (const DocRecord& d : docs_) {
    if (d.modality == m) ++n;
  }
  return n;
}

RankedList VectorStore::topk(const Vector& query_emb, std::size_t k,
                             std::optional<Modality> modality_filter,
                             const EnhancerParams* enhancer) const {
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "topk: k must be >= 1");
  }
  if (query_emb.size() != dim_) {
    fail(ErrorKind::DimMismatch,
         "topk: query dim " + std::to_string(query_emb.size()) +
             " does not match store dim " + std::to_string(dim_));
  }

  std::optional<Vector> enhanced_query;
  if (enhancer != nullptr) {
    enhanced_query = enhance(*enhancer, query_emb);
  }

  RankedList entries;
  entries.reserve(docs_.size());
  for (const DocRecord& d : docs_) {
    if (modality_filter && d.modality != *modality_filter) continue;
    RankedEntry e;
    e.doc_id = d.doc_id;
    e.raw_cosine = cosine(query_emb, d.embedding);
    if (enhancer != nullptr) {
      const Vector zd = enhance(*enhancer, d.embedding);
      const double s_hat = cosine(*enhanced_query, zd);
      e.enhanced_score = s_hat;
      e.report_score = report_score(s_hat);
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) {
    fail(ErrorKind::EmptyStore, "topk: no documents match the filter");
  }

  const bool by_enhanced = enhancer != nullptr;
  std::sort(entries.begin(), entries.end(),
            [by_enhanced](const RankedEntry& a, const RankedEntry& b) {
              const double sa = by_enhanced ? *a.enhanced_score : a.raw_cosine;
              const double sb = by_enhanced ? *b.enhanced_score : b.raw_cosine;
              if (sa != sb) return sa > sb;
              return a.doc_id < b.doc_id;
            });
  if (entries.size() > k) {
    entries.resize(k);
  }
  return entries;
}

}  // namespace jetr
