// jetr: synthetic-corpus generation, corpus validation, enhancer training,
// retrieval evaluation, per-query ranking, and context-policy lookup.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime/numeric failure,
// 3 bad arguments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "jetr/context_policy.hpp"
#include "jetr/dataset.hpp"
#include "jetr/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitBadArgs = 3;

int classify(const jetr::Error& e) {
  switch (e.kind()) {
    case jetr::ErrorKind::Io:
    case jetr::ErrorKind::NonFinite:
    case jetr::ErrorKind::UndefinedSimilarity:
    case jetr::ErrorKind::DegenerateVariance:
      return kExitRuntime;
    case jetr::ErrorKind::NotFound:
      return kExitBadArgs;
    default:
      return kExitValidation;
  }
}

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const jetr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("JETR_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') {
    jetr::fail(jetr::ErrorKind::NotFound,
               "JETR_SEED is not an unsigned integer: '" + std::string(raw) +
                   "'");
  }
  return static_cast<std::uint64_t>(v);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) {
    std::cerr << "warning: " << w << "\n";
  }
}

ordered_json report_json(const jetr::MetricsReport& report) {
  return ordered_json::parse(jetr::report_to_json(report));
}

struct MetricColumn {
  const char* name;
  double jetr::MetricsReport::* field;
};

const MetricColumn kMetricColumns[] = {
    {"mrr", &jetr::MetricsReport::mrr},
    {"map", &jetr::MetricsReport::map},
    {"ndcg", &jetr::MetricsReport::ndcg_at_k},
    {"recall", &jetr::MetricsReport::recall_at_k},
    {"precision", &jetr::MetricsReport::precision_at_k},
    {"f1", &jetr::MetricsReport::f1_at_k},
    {"hit_rate", &jetr::MetricsReport::hit_rate_at_k},
    {"mean_cosine", &jetr::MetricsReport::mean_cosine},
};

void write_per_query_csv(const jetr::EvalResult& result, std::size_t k,
                         const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    jetr::fail(jetr::ErrorKind::Io, "cannot write " + path.string());
  }
  const std::string at_k = "_at_" + std::to_string(k);
  out << "query_id";
  for (const auto& scorer : {"raw", "enhanced"}) {
    if (std::string(scorer) == "enhanced" && !result.enhanced) break;
    for (const MetricColumn& col : kMetricColumns) {
      std::string name = col.name;
      if (name != "mrr" && name != "map" && name != "mean_cosine") {
        name += at_k;
      }
      out << ',' << scorer << '_' << name;
    }
  }
  out << '\n';
  out << std::setprecision(17);
  for (const jetr::PerQueryMetrics& pq : result.per_query) {
    out << pq.query_id;
    for (const MetricColumn& col : kMetricColumns) {
      out << ',' << pq.raw.*(col.field);
    }
    if (pq.enhanced) {
      for (const MetricColumn& col : kMetricColumns) {
        out << ',' << (*pq.enhanced).*(col.field);
      }
    }
    out << '\n';
  }
}

void print_significance(const jetr::EvalResult& result) {
  std::cout << "paired t-test, enhanced vs raw (n="
            << result.per_query.size() << "):\n";
  for (const MetricColumn& col : kMetricColumns) {
    std::vector<double> enh, raw;
    enh.reserve(result.per_query.size());
    raw.reserve(result.per_query.size());
    for (const jetr::PerQueryMetrics& pq : result.per_query) {
      enh.push_back((*pq.enhanced).*(col.field));
      raw.push_back(pq.raw.*(col.field));
    }
    std::cout << "  " << std::left << std::setw(12) << col.name << std::right;
    try {
      const jetr::TTestResult t = jetr::paired_significance(enh, raw);
      const std::string mark = jetr::significance_annotation(t.p_value);
      std::cout << " diff=" << std::showpos << std::fixed
                << std::setprecision(4) << t.mean_diff << std::noshowpos
                << "  t=" << std::setprecision(3) << t.t_statistic
                << "  p=" << std::setprecision(4) << t.p_value;
      if (!mark.empty()) std::cout << "  " << mark;
      std::cout << std::defaultfloat << "\n";
    } catch (const jetr::Error&) {
      std::cout << " identical per-query values (no test)\n";
    }
  }
  std::cout << "  (* p<0.05, † p<0.1)\n";
}

int cmd_synth(const std::string& config_path, const std::string& out_dir) {
  jetr::SyntheticConfig base;
  if (auto seed = env_seed()) base.seed = *seed;
  const jetr::SyntheticConfig cfg =
      config_path.empty() ? base
                          : jetr::synthetic_config_from_json_file(config_path,
                                                                  base);
  const jetr::Corpus corpus = jetr::synth_generate(cfg, out_dir);
  std::cout << "synthetic corpus written to " << out_dir << "\n"
            << "  docs=" << corpus.store.size()
            << " queries=" << corpus.queries.size()
            << " logit_records=" << corpus.logits.size()
            << " dim=" << corpus.store.dim() << "\n"
            << "  splits: train=" << corpus.splits.train.size()
            << " validation=" << corpus.splits.validation.size()
            << " test=" << corpus.splits.test.size() << "\n"
            << "  seed=" << cfg.seed << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& corpus_dir) {
  jetr::Corpus corpus;
  try {
    corpus = jetr::load_corpus(corpus_dir);
  } catch (const jetr::Error& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kExitValidation;
  }
  print_warnings(corpus.warnings);
  std::cout << "corpus " << corpus_dir << " is valid\n"
            << "  dim=" << corpus.store.dim() << "\n"
            << "  docs=" << corpus.store.size()
            << " (text=" << corpus.store.count(jetr::Modality::Text)
            << ", image=" << corpus.store.count(jetr::Modality::Image)
            << ")\n"
            << "  queries=" << corpus.queries.size() << "\n"
            << "  logit_records=" << corpus.logits.size() << "\n"
            << "  splits: train=" << corpus.splits.train.size()
            << " validation=" << corpus.splits.validation.size()
            << " test=" << corpus.splits.test.size() << "\n"
            << "  fingerprint=" << std::hex << corpus.fingerprint << std::dec
            << "\n";
  return kExitOk;
}

int cmd_train(const std::string& corpus_dir, const std::string& config_path,
              const std::string& out_path, const std::string& history_path,
              bool deterministic_flag) {
  jetr::TrainConfig base;
  if (auto seed = env_seed()) base.seed = *seed;
  jetr::TrainConfig cfg =
      config_path.empty()
          ? base
          : jetr::train_config_from_json_file(config_path, base);
  if (deterministic_flag) cfg.deterministic = true;

  const jetr::Corpus corpus = jetr::load_corpus(corpus_dir);
  print_warnings(corpus.warnings);

  const jetr::TrainResult result = jetr::train(corpus, cfg);
  jetr::save_checkpoint(result.checkpoint, out_path);
  if (!history_path.empty()) {
    jetr::write_history_csv(result.history, history_path);
  }

  if (result.history.empty()) {
    std::cout << "trained 0 steps (epochs=" << cfg.epochs
              << "); checkpoint holds the initialization\n";
  } else {
    const jetr::StepRecord& last = result.history.back();
    std::cout << "trained " << result.history.size() << " steps over "
              << cfg.epochs << " epochs\n"
              << "  final rank_loss=" << last.rank_loss
              << " gen_loss=" << last.gen_loss_mean
              << " total_loss=" << last.total_loss
              << " pairs=" << last.contributing_pairs << "\n";
  }
  std::cout << "checkpoint -> " << out_path << "\n";
  if (!history_path.empty()) {
    std::cout << "history -> " << history_path << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& corpus_dir, const std::string& split,
             const std::string& ckpt_path, std::size_t k,
             const std::string& json_path) {
  const jetr::Corpus corpus = jetr::load_corpus(corpus_dir);
  print_warnings(corpus.warnings);

  std::optional<jetr::Checkpoint> ckpt;
  if (!ckpt_path.empty()) {
    ckpt = jetr::load_checkpoint(ckpt_path);
    if (ckpt->corpus_fingerprint != corpus.fingerprint) {
      std::cerr << "warning: checkpoint was trained on a different corpus\n";
    }
  }

  const jetr::EvalResult result = jetr::evaluate(
      corpus, split, ckpt ? &ckpt->params : nullptr, k);

  ordered_json out;
  out["split"] = split;
  out["k"] = k;
  out["evaluated_queries"] = result.per_query.size();
  out["unevaluable_queries"] = result.unevaluable;
  out["raw"] = report_json(result.raw);
  if (result.enhanced) {
    out["enhanced"] = report_json(*result.enhanced);
  }

  if (json_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream file(json_path, std::ios::trunc);
    if (!file) {
      jetr::fail(jetr::ErrorKind::Io, "cannot write " + json_path);
    }
    file << out.dump(2) << "\n";
    fs::path csv_path(json_path);
    csv_path.replace_extension(".per_query.csv");
    write_per_query_csv(result, k, csv_path);
    std::cout << out.dump(2) << "\n";
    std::cout << "report -> " << json_path << "\n"
              << "per-query -> " << csv_path.string() << "\n";
  }
  if (result.enhanced) {
    print_significance(result);
  }
  return kExitOk;
}

int cmd_rank(const std::string& corpus_dir, const std::string& ckpt_path,
             const std::string& query_id, std::size_t k) {
  const jetr::Corpus corpus = jetr::load_corpus(corpus_dir);
  const jetr::QueryRecord* query = corpus.find_query(query_id);
  if (query == nullptr) {
    jetr::fail(jetr::ErrorKind::NotFound,
               "unknown query '" + query_id + "'");
  }
  const jetr::Checkpoint ckpt = jetr::load_checkpoint(ckpt_path);
  const jetr::Vector fused = jetr::fuse_query_embedding(
      query->text_embedding, query->image_embedding);
  const jetr::RankedList ranked =
      corpus.store.topk(fused, k, std::nullopt, &ckpt.params);

  std::cout << "query " << query_id << " ("
            << jetr::to_string(query->qtype) << ", lesson "
            << query->lesson_id << ")\n";
  std::cout << std::left << std::setw(6) << "rank" << std::setw(14)
            << "doc_id" << std::setw(8) << "type" << std::setw(12)
            << "cosine" << "retrieval_score\n";
  std::cout << std::fixed << std::setprecision(6);
  std::size_t rank = 1;
  for (const jetr::RankedEntry& e : ranked) {
    std::cout << std::left << std::setw(6) << rank++ << std::setw(14)
              << e.doc_id << std::setw(8)
              << jetr::to_string(corpus.store.doc(e.doc_id).modality)
              << std::setw(12) << e.raw_cosine << *e.report_score << "\n";
  }
  return kExitOk;
}

int cmd_policy(const std::string& qtype_str, const std::string& config_path) {
  jetr::QuestionType qtype;
  try {
    qtype = jetr::question_type_from_string(qtype_str);
  } catch (const jetr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadArgs;
  }
  const jetr::PolicyConfig cfg =
      config_path.empty() ? jetr::PolicyConfig{}
                          : jetr::policy_config_from_json_file(config_path);
  const auto [passages, images] = jetr::policy_counts(qtype, cfg);
  std::cout << "passages=" << passages << " images=" << images << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jetr: embedding-enhancer reranking for multimodal QA"};
  app.require_subcommand(1);

  std::string corpus_dir, config_path, out_path, history_path, ckpt_path;
  std::string split = "validation", json_path, query_id, qtype;
  std::size_t k = 10;
  bool deterministic_flag = false;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  synth->add_option("--config", config_path, "synthetic config JSON");
  synth->add_option("--out", out_path, "output corpus directory")
      ->required();

  CLI::App* validate =
      app.add_subcommand("validate", "check corpus integrity");
  validate->add_option("--corpus", corpus_dir, "corpus directory")
      ->required();

  CLI::App* train = app.add_subcommand("train", "train the enhancer");
  train->add_option("--corpus", corpus_dir, "corpus directory")->required();
  train->add_option("--config", config_path, "train config JSON");
  train->add_option("--out", out_path, "checkpoint output path")->required();
  train->add_option("--history", history_path, "history CSV output path");
  train->add_flag("--deterministic", deterministic_flag,
                  "force deterministic single-threaded execution");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate retrieval effectiveness");
  eval_cmd->add_option("--corpus", corpus_dir, "corpus directory")
      ->required();
  eval_cmd->add_option("--split", split, "train | validation | test")
      ->required();
  eval_cmd->add_option("--ckpt", ckpt_path,
                       "checkpoint for the enhanced scorer");
  eval_cmd->add_option("--k", k, "metrics cutoff (default 10)");
  eval_cmd->add_option("--json", json_path, "write the JSON report here");

  CLI::App* rank = app.add_subcommand("rank", "rank documents for a query");
  rank->add_option("--corpus", corpus_dir, "corpus directory")->required();
  rank->add_option("--ckpt", ckpt_path, "trained checkpoint")->required();
  rank->add_option("--query-id", query_id, "query to rank for")->required();
  rank->add_option("--k", k, "rows to print (default 10)");

  CLI::App* policy =
      app.add_subcommand("policy", "context counts for a question type");
  policy->add_option("--qtype", qtype,
                     "NDQ_TF | NDQ_MC | DQ_MC | AMBIGUOUS")
      ->required();
  policy->add_option("--config", config_path, "policy config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadArgs;
  }

  if (synth->parsed()) {
    return run_guarded([&] { return cmd_synth(config_path, out_path); });
  }
  if (validate->parsed()) {
    return run_guarded([&] { return cmd_validate(corpus_dir); });
  }
  if (train->parsed()) {
    return run_guarded([&] {
      return cmd_train(corpus_dir, config_path, out_path, history_path,
                       deterministic_flag);
    });
  }
  if (eval_cmd->parsed()) {
    return run_guarded(
        [&] { return cmd_eval(corpus_dir, split, ckpt_path, k, json_path); });
  }
  if (rank->parsed()) {
    return run_guarded(
        [&] { return cmd_rank(corpus_dir, ckpt_path, query_id, k); });
  }
  if (policy->parsed()) {
    return run_guarded([&] { return cmd_policy(qtype, config_path); });
  }
  return kExitBadArgs;
}
