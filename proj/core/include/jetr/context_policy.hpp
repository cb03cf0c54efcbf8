#pragma once

// Question-type-aware context selection: how many top-ranked passages and
// images accompany a question. The counts are configuration data so the
// whole ablation grid can be swept without code changes.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jetr/vector_store.hpp"

namespace jetr {

enum class QuestionType { NdqTf, NdqMc, DqMc, Ambiguous };

std::string to_string(QuestionType t);
QuestionType question_type_from_string(std::string_view s);

struct PolicyConfig {
  int ndq_passages = 6;
  int ndq_images = 0;
  int dq_passages = 0;
  int dq_images = 1;
  int fallback_passages = 3;
  int fallback_images = 1;
};

void validate(const PolicyConfig& cfg);
PolicyConfig policy_config_from_json_file(const std::filesystem::path& path);

struct ContextBundle {
  std::vector<std::string> passages;  // text doc ids, rank order preserved
  std::vector<std::string> images;    // image doc ids, rank order preserved
};

// (passages, images) the policy assigns to a question type.
std::pair<int, int> policy_counts(QuestionType qtype, const PolicyConfig& cfg);

// Applies the policy for the question type, silently truncating to what the
// rankings actually contain.
ContextBundle select_context(QuestionType qtype, const RankedList& ranked_text,
                             const RankedList& ranked_images,
                             const PolicyConfig& cfg = {});

struct PolicyCell {
  int passages = 0;
  int images = 0;
  bool optimal = false;
};

// The ablation grid, in published row order.
const std::vector<std::pair<std::string, PolicyCell>>& policy_table();

// Lookup by configuration name (e.g. "0P-1Image"); unknown names are an
// error.
PolicyCell policy_cell(const std::string& name);

}  // namespace jetr
