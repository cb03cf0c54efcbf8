#pragma once

// Corpus file formats and loaders. A corpus directory holds four JSONL
// files plus a manifest:
//
//   embeddings.jsonl  {"id","kind","modality","lesson_id","dim","values"}
//                     kind is "doc", "query_text" or "query_image"
//   queries.jsonl     {"query_id","qtype","choice_count","correct_index",
//                      "lesson_id"}
//   logits.jsonl      {"query_id","doc_id","choice_logits"}
//   splits.jsonl      {"train":[...],"validation":[...],"test":[...]}
//   manifest.json     counts and provenance, informational
//
// One UTF-8 JSON object per line; unknown fields are ignored with a
// warning. Loading validates referential integrity and reports parse
// errors with line numbers.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jetr/context_policy.hpp"
#include "jetr/metrics.hpp"
#include "jetr/vector_store.hpp"

namespace jetr {

inline constexpr const char* kEmbeddingsFile = "embeddings.jsonl";
inline constexpr const char* kQueriesFile = "queries.jsonl";
inline constexpr const char* kLogitsFile = "logits.jsonl";
inline constexpr const char* kSplitsFile = "splits.jsonl";
inline constexpr const char* kManifestFile = "manifest.json";

struct QueryRecord {
  std::string query_id;
  QuestionType qtype = QuestionType::NdqMc;
  Vector text_embedding;
  std::optional<Vector> image_embedding;  // present on diagram questions
  std::size_t choice_count = 0;
  std::size_t correct_index = 0;
  std::string lesson_id;
};

// Precomputed answer-choice logits of the frozen generator for one
// (query, document) context. Never mutated after load.
struct LogitRecord {
  std::string query_id;
  std::string doc_id;
  Vector choice_logits;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

struct Corpus {
  VectorStore store;
  std::vector<QueryRecord> queries;
  std::vector<LogitRecord> logits;
  SplitManifest splits;
  // FNV-1a over the four source files, in declared order.
  std::uint64_t fingerprint = 0;
  std::vector<std::string> warnings;

  const QueryRecord* find_query(const std::string& query_id) const;
  const LogitRecord* find_logits(const std::string& query_id,
                                 const std::string& doc_id) const;
  // "train" | "validation" | "test"; unknown names are an error.
  const std::vector<std::string>& split(const std::string& name) const;

  void rebuild_indexes();

 private:
  std::unordered_map<std::string, std::size_t> query_index_;
  std::unordered_map<std::string, std::size_t> logit_index_;
};

Corpus load_corpus(const std::filesystem::path& dir);

// Writes the four JSONL files plus manifest.json; load_corpus(save_corpus(c))
// is semantically equal to c. `manifest_extra` is merged into the manifest
// (used to record generator provenance).
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const std::string& manifest_extra_json = "");

std::uint64_t corpus_fingerprint(const std::filesystem::path& dir);

// Unit-normalized query embedding: the text direction alone, or the
// normalized mean of the two unit-normalized modality vectors.
Vector fuse_query_embedding(const Vector& text_emb,
                            const std::optional<Vector>& image_emb);

// Binary relevance from lesson membership: every document sharing the
// query's lesson. An empty result marks the query unevaluable.
QueryJudgment relevance_labels(const QueryRecord& query,
                               std::span<const DocRecord> docs);

// Synthetic corpus with planted relevance. Each embedding concatenates a
// "surface" block (dim - signal_dim values whose correlations dominate raw
// cosine but carry no lesson information) with a "signal" block aligned to
// a per-lesson direction. Generator logits reward signal alignment, so the
// weak supervision orders documents by lesson while raw cosine does not.
struct SyntheticConfig {
  std::size_t lessons = 8;
  std::size_t docs_per_lesson = 12;   // text first, last quarter image
  std::size_t queries_per_lesson = 4;
  std::size_t dim = 32;
  std::size_t signal_dim = 8;
  double noise_scale = 0.1;
  double logit_gain = 4.0;
  std::uint64_t seed = 42;
};

void validate(const SyntheticConfig& cfg);
// Starts from `base` (which carries any environment-derived defaults) and
// overrides with the file's keys.
SyntheticConfig synthetic_config_from_json_file(
    const std::filesystem::path& path, const SyntheticConfig& base = {});

// Generates and writes the corpus; byte-identical output for identical
// configs.
Corpus synth_generate(const SyntheticConfig& cfg,
                      const std::filesystem::path& out_dir);

}  // namespace jetr
