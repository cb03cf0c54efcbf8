#include "jetr/context_policy.hpp"

#include <fstream>

#include "json.hpp"

namespace jetr {

std::string to_string(QuestionType t) {
  switch (t) {
    case QuestionType::NdqTf: return "NDQ_TF";
    case QuestionType::NdqMc: return "NDQ_MC";
    case QuestionType::DqMc: return "DQ_MC";
    case QuestionType::Ambiguous: return "AMBIGUOUS";
  }
  fail(ErrorKind::InvalidArgument, "unknown question type value");
}

QuestionType question_type_from_string(std::string_view s) {
  if (s == "NDQ_TF") return QuestionType::NdqTf;
  if (s == "NDQ_MC") return QuestionType::NdqMc;
  if (s == "DQ_MC") return QuestionType::DqMc;
  if (s == "AMBIGUOUS") return QuestionType::Ambiguous;
  fail(ErrorKind::InvalidArgument,
       "unknown question type '" + std::string(s) + "'");
}

void validate(const PolicyConfig& cfg) {
  const int counts[] = {cfg.ndq_passages,      cfg.ndq_images,
                        cfg.dq_passages,       cfg.dq_images,
                        cfg.fallback_passages, cfg.fallback_images};
  for (int c : counts) {
    if (c < 0) {
      fail(ErrorKind::InvalidArgument,
           "policy counts must be nonnegative");
    }
  }
}

PolicyConfig policy_config_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Io, "cannot open policy config " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError,
         "policy config " + path.string() + ": " + e.what());
  }
  PolicyConfig cfg;
  cfg.ndq_passages = j.value("ndq_passages", cfg.ndq_passages);
  cfg.ndq_images = j.value("ndq_images", cfg.ndq_images);
  cfg.dq_passages = j.value("dq_passages", cfg.dq_passages);
  cfg.dq_images = j.value("dq_images", cfg.dq_images);
  cfg.fallback_passages = j.value("fallback_passages", cfg.fallback_passages);
  cfg.fallback_images = j.value("fallback_images", cfg.fallback_images);
  validate(cfg);
  return cfg;
}

namespace {

std::vector<std::string> take_ids(const RankedList& ranked, int count) {
  std::vector<std::string> ids;
  const std::size_t n =
      std::min(ranked.size(), static_cast<std::size_t>(count));
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(ranked[i].doc_id);
  }
  return ids;
}

}  // namespace

std::pair<int, int> policy_counts(QuestionType qtype,
                                  const PolicyConfig& cfg) {
  validate(cfg);
  switch (qtype) {
    case QuestionType::NdqTf:
    case QuestionType::NdqMc:
      return {cfg.ndq_passages, cfg.ndq_images};
    case QuestionType::DqMc:
      return {cfg.dq_passages, cfg.dq_images};
    case QuestionType::Ambiguous:
      return {cfg.fallback_passages, cfg.fallback_images};
  }
  fail(ErrorKind::InvalidArgument, "unknown question type value");
}

ContextBundle select_context(QuestionType qtype, const RankedList& ranked_text,
                             const RankedList& ranked_images,
                             const PolicyConfig& cfg) {
  const auto [passages, images] = policy_counts(qtype, cfg);
  ContextBundle bundle;
  bundle.passages = take_ids(ranked_text, passages);
  bundle.images = take_ids(ranked_images, images);
  return bundle;
}

const std::vector<std::pair<std::string, PolicyCell>>& policy_table() {
  static const std::vector<std::pair<std::string, PolicyCell>> table = {
      {"3P-3Images", {3, 3, false}},
      {"3P-1Image", {3, 1, false}},
      {"6P-1Image", {6, 1, false}},
      {"1P-1Image", {1, 1, false}},
      {"0P-1Image", {0, 1, true}},
  };
  return table;
}

PolicyCell policy_cell(const std::string& name) {
  for (const auto& [key, cell] : policy_table()) {
    if (key == name) return cell;
  }
  fail(ErrorKind::NotFound, "unknown policy configuration '" + name + "'");
}

}  // namespace jetr
