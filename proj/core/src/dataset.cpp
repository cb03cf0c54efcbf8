#include "jetr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace jetr {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kSurfaceGain = 4.0;
constexpr double kSurfaceNoise = 1.0;
constexpr double kChoiceNoise = 0.01;

std::string loc(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line);
}

// One parsed JSONL line with its provenance.
struct Line {
  json obj;
  std::size_t number = 0;
};

std::vector<Line> read_jsonl(const std::filesystem::path& path,
                             const std::string& name) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::vector<Line> lines;
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    Line line;
    line.number = number;
    try {
      line.obj = json::parse(raw);
    } catch (const json::exception& e) {
      fail(ErrorKind::ParseError, loc(name, number) + ": " + e.what());
    }
    if (!line.obj.is_object()) {
      fail(ErrorKind::ParseError,
           loc(name, number) + ": expected a JSON object");
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

const json& require_field(const json& obj, const char* key,
                          const std::string& name, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    fail(ErrorKind::ParseError,
         loc(name, line) + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

std::string get_string(const json& obj, const char* key,
                       const std::string& name, std::size_t line) {
  const json& v = require_field(obj, key, name, line);
  if (!v.is_string()) {
    fail(ErrorKind::ParseError,
         loc(name, line) + ": field '" + std::string(key) +
             "' must be a string");
  }
  return v.get<std::string>();
}

std::size_t get_uint(const json& obj, const char* key,
                     const std::string& name, std::size_t line) {
  const json& v = require_field(obj, key, name, line);
  if (!v.is_number_unsigned() && !(v.is_number_integer() &&
                                   v.get<std::int64_t>() >= 0)) {
    fail(ErrorKind::ParseError,
         loc(name, line) + ": field '" + std::string(key) +
             "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

Vector get_double_array(const json& obj, const char* key,
                        const std::string& name, std::size_t line) {
  const json& v = require_field(obj, key, name, line);
  if (!v.is_array()) {
    fail(ErrorKind::ParseError,
         loc(name, line) + ": field '" + std::string(key) +
             "' must be an array");
  }
  Vector out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) {
      fail(ErrorKind::ParseError,
           loc(name, line) + ": field '" + std::string(key) +
               "' must contain only numbers");
    }
    const double d = e.get<double>();
    if (!std::isfinite(d)) {
      fail(ErrorKind::NonFinite,
           loc(name, line) + ": non-finite value in '" + std::string(key) +
               "'");
    }
    out.push_back(d);
  }
  return out;
}

void warn_unknown_fields(const json& obj,
                         std::initializer_list<const char*> known,
                         const std::string& name, std::size_t line,
                         std::vector<std::string>& warnings) {
  for (const auto& [key, value] : obj.items()) {
    bool found = false;
    for (const char* k : known) {
      if (key == k) {
        found = true;
        break;
      }
    }
    if (!found) {
      warnings.push_back(loc(name, line) + ": unknown field '" + key +
                         "' ignored");
    }
  }
}

std::uint64_t fnv1a_file(std::uint64_t hash,
                         const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<std::uint8_t>(buf[i]);
      hash *= kPrime;
    }
  }
  // File separator so concatenation boundaries stay unambiguous.
  hash ^= 0x1F;
  hash *= kPrime;
  return hash;
}

}  // namespace

const QueryRecord* Corpus::find_query(const std::string& query_id) const {
  auto it = query_index_.find(query_id);
  return it == query_index_.end() ? nullptr : &queries[it->second];
}

const LogitRecord* Corpus::find_logits(const std::string& query_id,
                                       const std::string& doc_id) const {
  auto it = logit_index_.find(query_id + '\x1f' + doc_id);
  return it == logit_index_.end() ? nullptr : &logits[it->second];
}

const std::vector<std::string>& Corpus::split(const std::string& name) const {
  if (name == "train") return splits.train;
  if (name == "validation") return splits.validation;
  if (name == "test") return splits.test;
  fail(ErrorKind::NotFound, "unknown split '" + name + "'");
}

void Corpus::rebuild_indexes() {
  query_index_.clear();
  logit_index_.clear();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    query_index_.emplace(queries[i].query_id, i);
  }
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logit_index_.emplace(logits[i].query_id + '\x1f' + logits[i].doc_id, i);
  }
}

std::uint64_t corpus_fingerprint(const std::filesystem::path& dir) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (const char* name :
       {kEmbeddingsFile, kQueriesFile, kLogitsFile, kSplitsFile}) {
    hash = fnv1a_file(hash, dir / name);
  }
  return hash;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  Corpus corpus;
  corpus.fingerprint = corpus_fingerprint(dir);

  // Embedding rows, routed by kind.
  struct EmbeddingRow {
    Vector values;
    std::string lesson_id;
  };
  std::unordered_map<std::string, EmbeddingRow> query_text_rows;
  std::unordered_map<std::string, EmbeddingRow> query_image_rows;
  std::size_t corpus_dim = 0;

  for (const Line& line : read_jsonl(dir / kEmbeddingsFile, kEmbeddingsFile)) {
    const json& o = line.obj;
    warn_unknown_fields(o, {"id", "kind", "modality", "lesson_id", "dim",
                            "values"},
                        kEmbeddingsFile, line.number, corpus.warnings);
    const std::string id = get_string(o, "id", kEmbeddingsFile, line.number);
    const std::string kind =
        get_string(o, "kind", kEmbeddingsFile, line.number);
    const std::string modality_str =
        get_string(o, "modality", kEmbeddingsFile, line.number);
    const std::string lesson =
        get_string(o, "lesson_id", kEmbeddingsFile, line.number);
    const std::size_t dim = get_uint(o, "dim", kEmbeddingsFile, line.number);
    Vector values = get_double_array(o, "values", kEmbeddingsFile,
                                     line.number);
    if (dim == 0) {
      fail(ErrorKind::InvalidArgument,
           loc(kEmbeddingsFile, line.number) + ": dim must be >= 1");
    }
    if (values.size() != dim) {
      fail(ErrorKind::DimMismatch,
           loc(kEmbeddingsFile, line.number) + ": declared dim " +
               std::to_string(dim) + " but " + std::to_string(values.size()) +
               " values");
    }
    if (corpus_dim == 0) {
      corpus_dim = dim;
    } else if (dim != corpus_dim) {
      fail(ErrorKind::DimMismatch,
           loc(kEmbeddingsFile, line.number) + ": dim " + std::to_string(dim) +
               " differs from corpus dim " + std::to_string(corpus_dim));
    }

    if (kind == "doc") {
      if (corpus.store.contains(id)) {
        fail(ErrorKind::DuplicateId,
             loc(kEmbeddingsFile, line.number) + ": duplicate doc id '" + id +
                 "'");
      }
      if (l2_norm(values) == 0.0) {
        fail(ErrorKind::InvalidArgument,
             loc(kEmbeddingsFile, line.number) + ": doc '" + id +
                 "' has a zero-norm embedding");
      }
      DocRecord rec;
      rec.doc_id = id;
      rec.modality = modality_from_string(modality_str);
      rec.lesson_id = lesson;
      rec.embedding = std::move(values);
      corpus.store.insert(std::move(rec));
    } else if (kind == "query_text" || kind == "query_image") {
      auto& rows = kind == "query_text" ? query_text_rows : query_image_rows;
      if (rows.contains(id)) {
        fail(ErrorKind::DuplicateId,
             loc(kEmbeddingsFile, line.number) + ": duplicate " + kind +
                 " embedding for '" + id + "'");
      }
      rows.emplace(id, EmbeddingRow{std::move(values), lesson});
    } else {
      fail(ErrorKind::ParseError,
           loc(kEmbeddingsFile, line.number) + ": unknown kind '" + kind +
               "'");
    }
  }

  // Queries.
  std::set<std::string> seen_queries;
  for (const Line& line : read_jsonl(dir / kQueriesFile, kQueriesFile)) {
    const json& o = line.obj;
    warn_unknown_fields(o, {"query_id", "qtype", "choice_count",
                            "correct_index", "lesson_id"},
                        kQueriesFile, line.number, corpus.warnings);
    QueryRecord q;
    q.query_id = get_string(o, "query_id", kQueriesFile, line.number);
    if (!seen_queries.insert(q.query_id).second) {
      fail(ErrorKind::DuplicateId,
           loc(kQueriesFile, line.number) + ": duplicate query id '" +
               q.query_id + "'");
    }
    try {
      q.qtype = question_type_from_string(
          get_string(o, "qtype", kQueriesFile, line.number));
    } catch (const Error& e) {
      fail(ErrorKind::ParseError,
           loc(kQueriesFile, line.number) + ": " + e.what());
    }
    q.choice_count = get_uint(o, "choice_count", kQueriesFile, line.number);
    q.correct_index = get_uint(o, "correct_index", kQueriesFile, line.number);
    q.lesson_id = get_string(o, "lesson_id", kQueriesFile, line.number);
    if (q.choice_count < 2) {
      fail(ErrorKind::InvalidArgument,
           loc(kQueriesFile, line.number) + ": query '" + q.query_id +
               "' needs at least two choices");
    }
    if (q.correct_index >= q.choice_count) {
      fail(ErrorKind::InvalidArgument,
           loc(kQueriesFile, line.number) + ": correct_index out of range");
    }
    auto text_it = query_text_rows.find(q.query_id);
    if (text_it == query_text_rows.end()) {
      fail(ErrorKind::DanglingReference,
           loc(kQueriesFile, line.number) + ": query '" + q.query_id +
               "' has no query_text embedding");
    }
    if (text_it->second.lesson_id != q.lesson_id) {
      corpus.warnings.push_back(
          loc(kQueriesFile, line.number) + ": lesson_id differs from the " +
          "query_text embedding row; using the query record's");
    }
    q.text_embedding = text_it->second.values;
    if (auto img_it = query_image_rows.find(q.query_id);
        img_it != query_image_rows.end()) {
      q.image_embedding = img_it->second.values;
    }
    corpus.queries.push_back(std::move(q));
  }
  corpus.rebuild_indexes();

  for (const auto& [id, row] : query_text_rows) {
    if (corpus.find_query(id) == nullptr) {
      corpus.warnings.push_back(std::string(kEmbeddingsFile) +
                                ": query_text embedding '" + id +
                                "' has no query record");
    }
  }

  // Logits.
  std::set<std::string> seen_logit_keys;
  for (const Line& line : read_jsonl(dir / kLogitsFile, kLogitsFile)) {
    const json& o = line.obj;
    warn_unknown_fields(o, {"query_id", "doc_id", "choice_logits"},
                        kLogitsFile, line.number, corpus.warnings);
    LogitRecord rec;
    rec.query_id = get_string(o, "query_id", kLogitsFile, line.number);
    rec.doc_id = get_string(o, "doc_id", kLogitsFile, line.number);
    rec.choice_logits =
        get_double_array(o, "choice_logits", kLogitsFile, line.number);
    const QueryRecord* q = corpus.find_query(rec.query_id);
    if (q == nullptr) {
      fail(ErrorKind::DanglingReference,
           loc(kLogitsFile, line.number) + ": unknown query '" +
               rec.query_id + "'");
    }
    if (!corpus.store.contains(rec.doc_id)) {
      fail(ErrorKind::DanglingReference,
           loc(kLogitsFile, line.number) + ": unknown doc '" + rec.doc_id +
               "'");
    }
    if (rec.choice_logits.size() != q->choice_count) {
      fail(ErrorKind::DimMismatch,
           loc(kLogitsFile, line.number) + ": " +
               std::to_string(rec.choice_logits.size()) +
               " logits for a query with " + std::to_string(q->choice_count) +
               " choices");
    }
    if (!seen_logit_keys.insert(rec.query_id + '\x1f' + rec.doc_id).second) {
      fail(ErrorKind::DuplicateId,
           loc(kLogitsFile, line.number) + ": duplicate logits for (" +
               rec.query_id + ", " + rec.doc_id + ")");
    }
    corpus.logits.push_back(std::move(rec));
  }
  corpus.rebuild_indexes();

  // Splits.
  const auto split_lines = read_jsonl(dir / kSplitsFile, kSplitsFile);
  if (split_lines.size() != 1) {
    fail(ErrorKind::ParseError,
         std::string(kSplitsFile) + ": expected exactly one JSON object");
  }
  const json& so = split_lines.front().obj;
  warn_unknown_fields(so, {"train", "validation", "test"}, kSplitsFile,
                      split_lines.front().number, corpus.warnings);
  std::set<std::string> assigned;
  auto read_split = [&](const char* key) {
    std::vector<std::string> ids;
    const json& arr = require_field(so, key, kSplitsFile, 1);
    if (!arr.is_array()) {
      fail(ErrorKind::ParseError,
           std::string(kSplitsFile) + ": '" + key + "' must be an array");
    }
    for (const json& e : arr) {
      if (!e.is_string()) {
        fail(ErrorKind::ParseError,
             std::string(kSplitsFile) + ": '" + key +
                 "' must contain strings");
      }
      std::string id = e.get<std::string>();
      if (corpus.find_query(id) == nullptr) {
        fail(ErrorKind::DanglingReference,
             std::string(kSplitsFile) + ": split '" + key +
                 "' references unknown query '" + id + "'");
      }
      if (!assigned.insert(id).second) {
        fail(ErrorKind::InvalidArgument,
             std::string(kSplitsFile) + ": query '" + id +
                 "' assigned to more than one split");
      }
      ids.push_back(std::move(id));
    }
    return ids;
  };
  corpus.splits.train = read_split("train");
  corpus.splits.validation = read_split("validation");
  corpus.splits.test = read_split("test");
  if (corpus.splits.train.empty()) {
    fail(ErrorKind::InvalidArgument,
         std::string(kSplitsFile) + ": train split must be nonempty");
  }

  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const std::string& manifest_extra_json) {
  std::filesystem::create_directories(dir);

  auto open_out = [&dir](const char* name) {
    std::ofstream out(dir / name, std::ios::trunc);
    if (!out) {
      fail(ErrorKind::Io, "cannot write " + (dir / name).string());
    }
    return out;
  };

  {
    std::ofstream out = open_out(kEmbeddingsFile);
    auto write_row = [&out](const std::string& id, const char* kind,
                            const std::string& modality,
                            const std::string& lesson, const Vector& values) {
      ordered_json row;
      row["id"] = id;
      row["kind"] = kind;
      row["modality"] = modality;
      row["lesson_id"] = lesson;
      row["dim"] = values.size();
      row["values"] = values;
      out << row.dump() << '\n';
    };
    for (const DocRecord& d : corpus.store.docs()) {
      write_row(d.doc_id, "doc", to_string(d.modality), d.lesson_id,
                d.embedding);
    }
    for (const QueryRecord& q : corpus.queries) {
      write_row(q.query_id, "query_text", "text", q.lesson_id,
                q.text_embedding);
      if (q.image_embedding) {
        write_row(q.query_id, "query_image", "image", q.lesson_id,
                  *q.image_embedding);
      }
    }
  }
  {
    std::ofstream out = open_out(kQueriesFile);
    for (const QueryRecord& q : corpus.queries) {
      ordered_json row;
      row["query_id"] = q.query_id;
      row["qtype"] = to_string(q.qtype);
      row["choice_count"] = q.choice_count;
      row["correct_index"] = q.correct_index;
      row["lesson_id"] = q.lesson_id;
      out << row.dump() << '\n';
    }
  }
  {
    std::ofstream out = open_out(kLogitsFile);
    for (const LogitRecord& rec : corpus.logits) {
      ordered_json row;
      row["query_id"] = rec.query_id;
      row["doc_id"] = rec.doc_id;
      row["choice_logits"] = rec.choice_logits;
      out << row.dump() << '\n';
    }
  }
  {
    std::ofstream out = open_out(kSplitsFile);
    ordered_json row;
    row["train"] = corpus.splits.train;
    row["validation"] = corpus.splits.validation;
    row["test"] = corpus.splits.test;
    out << row.dump() << '\n';
  }
  {
    ordered_json manifest;
    manifest["format_version"] = 1;
    manifest["dim"] = corpus.store.dim();
    manifest["docs"] = corpus.store.size();
    manifest["queries"] = corpus.queries.size();
    manifest["logit_records"] = corpus.logits.size();
    manifest["splits"] = {{"train", corpus.splits.train.size()},
                          {"validation", corpus.splits.validation.size()},
                          {"test", corpus.splits.test.size()}};
    if (!manifest_extra_json.empty()) {
      json extra = json::parse(manifest_extra_json);
      for (const auto& [key, value] : extra.items()) {
        manifest[key] = value;
      }
    }
    std::ofstream out = open_out(kManifestFile);
    out << manifest.dump(2) << '\n';
  }
}

Vector fuse_query_embedding(const Vector& text_emb,
                            const std::optional<Vector>& image_emb) {
  const double tn = l2_norm(text_emb);
  if (tn == 0.0) {
    fail(ErrorKind::InvalidArgument, "fuse: zero-norm text embedding");
  }
  Vector fused(text_emb.size());
  if (!image_emb) {
    for (std::size_t i = 0; i < fused.size(); ++i) {
      fused[i] = text_emb[i] / tn;
    }
    return fused;
  }
  if (image_emb->size() != text_emb.size()) {
    fail(ErrorKind::DimMismatch, "fuse: modality dims differ");
  }
  const double in = l2_norm(*image_emb);
  if (in == 0.0) {
    fail(ErrorKind::InvalidArgument, "fuse: zero-norm image embedding");
  }
  for (std::size_t i = 0; i < fused.size(); ++i) {
    fused[i] = 0.5 * (text_emb[i] / tn + (*image_emb)[i] / in);
  }
  const double fn = l2_norm(fused);
  if (fn == 0.0) {
    fail(ErrorKind::InvalidArgument,
         "fuse: antipodal modalities, fused embedding vanished");
  }
  for (double& v : fused) v /= fn;
  return fused;
}

QueryJudgment relevance_labels(const QueryRecord& query,
                               std::span<const DocRecord> docs) {
  QueryJudgment judgment;
  judgment.query_id = query.query_id;
  for (const DocRecord& d : docs) {
    if (d.lesson_id == query.lesson_id) {
      judgment.relevant_doc_ids.insert(d.doc_id);
    }
  }
  return judgment;
}

void validate(const SyntheticConfig& cfg) {
  if (cfg.lessons == 0 || cfg.docs_per_lesson == 0 ||
      cfg.queries_per_lesson == 0) {
    fail(ErrorKind::InvalidArgument, "synthetic: counts must be positive");
  }
  if (cfg.signal_dim == 0 || cfg.signal_dim >= cfg.dim) {
    fail(ErrorKind::InvalidArgument,
         "synthetic: requires 1 <= signal_dim < dim");
  }
  if (cfg.noise_scale < 0.0) {
    fail(ErrorKind::InvalidArgument, "synthetic: noise_scale must be >= 0");
  }
  if (cfg.logit_gain < 0.0) {
    fail(ErrorKind::InvalidArgument, "synthetic: logit_gain must be >= 0");
  }
}

SyntheticConfig synthetic_config_from_json_file(
    const std::filesystem::path& path, const SyntheticConfig& base) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Io, "cannot open synthetic config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError,
         "synthetic config " + path.string() + ": " + e.what());
  }
  SyntheticConfig cfg = base;
  cfg.lessons = j.value("lessons", cfg.lessons);
  cfg.docs_per_lesson = j.value("docs_per_lesson", cfg.docs_per_lesson);
  cfg.queries_per_lesson = j.value("queries_per_lesson",
                                   cfg.queries_per_lesson);
  cfg.dim = j.value("dim", cfg.dim);
  cfg.signal_dim = j.value("signal_dim", cfg.signal_dim);
  cfg.noise_scale = j.value("noise_scale", cfg.noise_scale);
  cfg.logit_gain = j.value("logit_gain", cfg.logit_gain);
  cfg.seed = j.value("seed", cfg.seed);
  validate(cfg);
  return cfg;
}

namespace {

std::string two_digits(std::size_t n) {
  std::ostringstream os;
  if (n < 10) os << '0';
  os << n;
  return os.str();
}

}  // namespace

Corpus synth_generate(const SyntheticConfig& cfg,
                      const std::filesystem::path& out_dir) {
  validate(cfg);
  SplitMix64 rng(cfg.seed);
  const std::size_t surf_dim = cfg.dim - cfg.signal_dim;

  // Per-lesson unit signal directions: independent random draws, not
  // orthogonalized, so held-out lessons overlap the subspace the training
  // lessons exercise while same-lesson alignment still dominates.
  std::vector<Vector> lesson_dirs;
  lesson_dirs.reserve(cfg.lessons);
  for (std::size_t l = 0; l < cfg.lessons; ++l) {
    Vector dir(cfg.signal_dim);
    for (double& v : dir) v = rng.gaussian();
    const double n = l2_norm(dir);
    for (double& v : dir) v /= n;
    lesson_dirs.push_back(std::move(dir));
  }

  // Shared surface direction; its weight dwarfs the signal block so raw
  // cosine carries essentially no lesson information.
  Vector common(surf_dim);
  for (double& v : common) v = rng.gaussian();
  {
    const double n = l2_norm(common);
    for (double& v : common) v /= n;
  }

  auto make_embedding = [&](std::size_t lesson) {
    Vector e(cfg.dim);
    for (std::size_t i = 0; i < surf_dim; ++i) {
      e[i] = kSurfaceGain * common[i] + kSurfaceNoise * rng.gaussian();
    }
    for (std::size_t j = 0; j < cfg.signal_dim; ++j) {
      e[surf_dim + j] =
          lesson_dirs[lesson][j] + cfg.noise_scale * rng.gaussian();
    }
    return e;
  };

  Corpus corpus;
  const std::size_t image_docs = cfg.docs_per_lesson / 4;
  const std::size_t text_docs = cfg.docs_per_lesson - image_docs;

  for (std::size_t l = 0; l < cfg.lessons; ++l) {
    const std::string lesson_id = "lesson_" + two_digits(l);
    for (std::size_t d = 0; d < cfg.docs_per_lesson; ++d) {
      DocRecord rec;
      rec.doc_id = "doc_" + two_digits(l) + "_" + two_digits(d);
      rec.modality = d < text_docs ? Modality::Text : Modality::Image;
      rec.lesson_id = lesson_id;
      rec.embedding = make_embedding(l);
      corpus.store.insert(std::move(rec));
    }
  }

  for (std::size_t l = 0; l < cfg.lessons; ++l) {
    const std::string lesson_id = "lesson_" + two_digits(l);
    for (std::size_t qi = 0; qi < cfg.queries_per_lesson; ++qi) {
      QueryRecord q;
      q.query_id = "q_" + two_digits(l) + "_" + two_digits(qi);
      q.lesson_id = lesson_id;
      switch (qi % 4) {
        case 0:
          q.qtype = QuestionType::NdqTf;
          q.choice_count = 2;
          break;
        case 3:
          q.qtype = QuestionType::DqMc;
          q.choice_count = 4;
          break;
        default:
          q.qtype = QuestionType::NdqMc;
          q.choice_count = 4;
          break;
      }
      q.correct_index = rng.next_u64() % q.choice_count;
      q.text_embedding = make_embedding(l);
      if (q.qtype == QuestionType::DqMc) {
        q.image_embedding = make_embedding(l);
      }
      corpus.queries.push_back(std::move(q));
    }
  }

  // Full (query, doc) logit grid: correct choice scores with the planted
  // signal alignment, the rest sit near zero.
  for (const QueryRecord& q : corpus.queries) {
    Vector sig_q(cfg.signal_dim, 0.0);
    for (std::size_t j = 0; j < cfg.signal_dim; ++j) {
      sig_q[j] = q.text_embedding[surf_dim + j];
    }
    if (q.image_embedding) {
      for (std::size_t j = 0; j < cfg.signal_dim; ++j) {
        sig_q[j] = 0.5 * (sig_q[j] + (*q.image_embedding)[surf_dim + j]);
      }
    }
    for (const DocRecord& d : corpus.store.docs()) {
      Vector sig_d(cfg.signal_dim, 0.0);
      for (std::size_t j = 0; j < cfg.signal_dim; ++j) {
        sig_d[j] = d.embedding[surf_dim + j];
      }
      LogitRecord rec;
      rec.query_id = q.query_id;
      rec.doc_id = d.doc_id;
      rec.choice_logits.assign(q.choice_count, 0.0);
      for (std::size_t k = 0; k < q.choice_count; ++k) {
        if (k != q.correct_index) {
          rec.choice_logits[k] = kChoiceNoise * rng.gaussian();
        }
      }
      rec.choice_logits[q.correct_index] = cfg.logit_gain * dot(sig_q, sig_d);
      corpus.logits.push_back(std::move(rec));
    }
  }

  // Lesson-level splits, roughly 5/8 train, 1/4 validation, 1/8 test.
  std::size_t n_val = std::max<std::size_t>(1, cfg.lessons / 4);
  std::size_t n_test = std::max<std::size_t>(1, cfg.lessons / 8);
  while (n_val + n_test >= cfg.lessons && n_val > 1) --n_val;
  while (n_val + n_test >= cfg.lessons && n_test > 1) --n_test;
  if (n_val + n_test >= cfg.lessons) {
    fail(ErrorKind::InvalidArgument,
         "synthetic: too few lessons to form three splits");
  }
  const std::size_t n_train = cfg.lessons - n_val - n_test;
  for (const QueryRecord& q : corpus.queries) {
    const std::size_t lesson =
        static_cast<std::size_t>(std::stoul(q.lesson_id.substr(7)));
    if (lesson < n_train) {
      corpus.splits.train.push_back(q.query_id);
    } else if (lesson < n_train + n_val) {
      corpus.splits.validation.push_back(q.query_id);
    } else {
      corpus.splits.test.push_back(q.query_id);
    }
  }

  ordered_json extra;
  extra["synthetic"] = {{"lessons", cfg.lessons},
                        {"docs_per_lesson", cfg.docs_per_lesson},
                        {"queries_per_lesson", cfg.queries_per_lesson},
                        {"dim", cfg.dim},
                        {"signal_dim", cfg.signal_dim},
                        {"noise_scale", cfg.noise_scale},
                        {"logit_gain", cfg.logit_gain},
                        {"seed", cfg.seed}};
  save_corpus(corpus, out_dir, extra.dump());

  corpus.fingerprint = corpus_fingerprint(out_dir);
  corpus.rebuild_indexes();
  return corpus;
}

}  // namespace jetr
