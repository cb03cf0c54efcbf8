#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "jetr/pipeline.hpp"
#include "test_util.hpp"

using namespace jetr;

namespace {

TrainConfig tiny_cfg() {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  cfg.k_candidates = 4;
  cfg.max_pairs_per_query = 6;
  // Hidden widths below ~8 can let an entire ReLU stack die for one input,
  // which makes its enhanced cosine undefined and aborts training.
  cfg.d_h1 = 8;
  cfg.d_h2 = 8;
  cfg.seed = 3;
  return cfg;
}

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));  // defaults are consistent
  cfg.max_pairs_per_query = 46;  // > 10*9/2
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = TrainConfig{};
  cfg.k_candidates = 1;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = TrainConfig{};
  cfg.epsilon_clamp = 0.5;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("train config json loading") {
  jetr_test::TempDir dir("train_cfg");
  const auto path = dir.path() / "train.json";
  std::ofstream(path) << R"({
    "batch_size": 4, "learning_rate": 0.01, "epochs": 7,
    "k_candidates": 5, "max_pairs_per_query": 10,
    "seed": 77, "weight_decay": 0.2, "d_h1": 16, "d_h2": 24
  })";
  const TrainConfig cfg = train_config_from_json_file(path);
  CHECK(cfg.batch_size == 4);
  CHECK(cfg.learning_rate == 0.01);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.k_candidates == 5);
  CHECK(cfg.seed == 77);
  CHECK(cfg.optimizer.weight_decay == 0.2);
  CHECK(cfg.d_h1 == 16);
  CHECK(cfg.lambda_gen == 1.0);  // untouched default

  TrainConfig base;
  base.seed = 123;
  std::ofstream(path) << R"({"epochs": 2})";
  const TrainConfig overlay = train_config_from_json_file(path, base);
  CHECK(overlay.seed == 123);
  CHECK(overlay.epochs == 2);
}

TEST_CASE("sample_pairs basics") {
  const Corpus corpus = jetr_test::tiny_corpus(5, 2, 3, 6);
  TrainConfig cfg = tiny_cfg();
  const EnhancerParams params = init_enhancer(
      1, EnhancerDims{6, cfg.d_h1, cfg.d_h2, 6});

  // 4 candidates -> 6 lexicographic pairs (none tied in the tiny corpus).
  const auto pairs =
      sample_pairs(corpus.queries[0], corpus, params, cfg);
  CHECK(pairs.size() == 6);
  for (const PairSample& p : pairs) {
    CHECK(p.query_id == corpus.queries[0].query_id);
    CHECK(p.doc_i_id != p.doc_j_id);
    CHECK(std::abs(p.gen_loss_i - p.gen_loss_j) > kTieTolerance);
    CHECK(std::abs(p.s_hat_i) <= 1.0);
    CHECK(std::abs(p.s_hat_j) <= 1.0);
  }

  // Truncation by max_pairs.
  cfg.max_pairs_per_query = 3;
  CHECK(sample_pairs(corpus.queries[0], corpus, params, cfg).size() == 3);

  // Two candidates with distinct losses -> exactly one pair.
  cfg.k_candidates = 2;
  cfg.max_pairs_per_query = 1;
  CHECK(sample_pairs(corpus.queries[0], corpus, params, cfg).size() == 1);
}

TEST_CASE("sample_pairs drops ties entirely") {
  Corpus corpus = jetr_test::tiny_corpus(6, 2, 3, 6);
  // Force every logit record to the same values: all gen losses tie.
  for (LogitRecord& rec : corpus.logits) {
    rec.choice_logits.assign(rec.choice_logits.size(), 0.5);
  }
  corpus.rebuild_indexes();
  const TrainConfig cfg = tiny_cfg();
  const EnhancerParams params =
      init_enhancer(1, EnhancerDims{6, cfg.d_h1, cfg.d_h2, 6});
  CHECK(sample_pairs(corpus.queries[0], corpus, params, cfg).empty());
}

TEST_CASE("sample_pairs missing logits: skip vs strict") {
  Corpus corpus = jetr_test::tiny_corpus(7, 2, 3, 6);
  // Remove one logit record.
  const std::string victim_doc = corpus.store.docs()[0].doc_id;
  std::erase_if(corpus.logits, [&](const LogitRecord& rec) {
    return rec.query_id == "q0" && rec.doc_id == victim_doc;
  });
  corpus.rebuild_indexes();

  TrainConfig cfg = tiny_cfg();
  cfg.k_candidates = 6;
  cfg.max_pairs_per_query = 15;
  const EnhancerParams params =
      init_enhancer(1, EnhancerDims{6, cfg.d_h1, cfg.d_h2, 6});

  std::vector<std::string> warnings;
  const auto pairs =
      sample_pairs(*corpus.find_query("q0"), corpus, params, cfg, &warnings);
  CHECK(pairs.size() == 10);  // 5 candidates remain -> C(5,2)
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find(victim_doc) != std::string::npos);

  cfg.strict_logits = true;
  CHECK_THROWS_AS(
      (void)sample_pairs(*corpus.find_query("q0"), corpus, params, cfg),
      Error);
}

TEST_CASE("batch gradients match finite differences of the total loss") {
  // The documented gradient-flow contract: FD of total_loss w.r.t. every
  // enhancer parameter on tiny corpora, 1e-5 relative.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Corpus corpus = jetr_test::tiny_corpus(seed, 2, 4, 8);
    TrainConfig cfg = tiny_cfg();
    cfg.d_h1 = 4;
    cfg.d_h2 = 6;
    EnhancerParams params =
        jetr_test::random_params(seed, EnhancerDims{8, 4, 6, 8});
    const std::vector<std::string> batch = corpus.splits.train;

    const BatchLoss analytic =
        batch_loss_and_grad(batch, corpus, params, cfg);
    auto loss_of = [&] {
      return batch_loss_and_grad(batch, corpus, params, cfg).total_loss;
    };

    std::vector<std::span<double>> pf;
    std::vector<std::span<const double>> gf;
    for_each_param(params, [&](std::span<double> f, bool) {
      pf.push_back(f);
    });
    for_each_param(analytic.grads,
                   [&](std::span<const double> f, bool) { gf.push_back(f); });
    for (std::size_t f = 0; f < pf.size(); ++f) {
      for (std::size_t i = 0; i < pf[f].size(); ++i) {
        const double fd = jetr_test::central_difference(pf[f][i], loss_of);
        CHECK(jetr_test::grads_close(gf[f][i], fd, 1e-5));
      }
    }
  }
}

TEST_CASE("gen term is constant in the parameters") {
  const Corpus corpus = jetr_test::tiny_corpus(9, 2, 3, 6);
  TrainConfig cfg = tiny_cfg();
  const EnhancerDims dims{6, cfg.d_h1, cfg.d_h2, 6};
  const std::vector<std::string> batch = corpus.splits.train;
  const BatchLoss a =
      batch_loss_and_grad(batch, corpus, init_enhancer(1, dims), cfg);
  const BatchLoss b =
      batch_loss_and_grad(batch, corpus, init_enhancer(2, dims), cfg);
  CHECK(a.gen_loss_mean == b.gen_loss_mean);
  CHECK(a.total_loss == doctest::Approx(a.rank_loss +
                                        cfg.lambda_gen * a.gen_loss_mean));
}

TEST_CASE("train_step with no contributing pairs applies only decay") {
  Corpus corpus = jetr_test::tiny_corpus(10, 2, 3, 6);
  for (LogitRecord& rec : corpus.logits) {
    rec.choice_logits.assign(rec.choice_logits.size(), 1.0);
  }
  corpus.rebuild_indexes();

  TrainConfig cfg = tiny_cfg();
  const EnhancerDims dims{6, cfg.d_h1, cfg.d_h2, 6};
  EnhancerParams params = init_enhancer(4, dims);
  const EnhancerParams before = params;
  OptState state = make_opt_state(dims);

  const StepRecord rec =
      train_step(corpus.splits.train, corpus, params, state, cfg, 1);
  CHECK(rec.contributing_pairs == 0);
  CHECK(rec.rank_loss == 0.0);
  const double decay = 1.0 - cfg.learning_rate * cfg.optimizer.weight_decay;
  for (std::size_t i = 0; i < params.w1.values.size(); ++i) {
    CHECK(params.w1.values[i] ==
          doctest::Approx(before.w1.values[i] * decay).epsilon(1e-15));
  }
  CHECK(params.b1 == before.b1);  // biases: no decay, no gradient
}

TEST_CASE("training is deterministic and seed sensitive") {
  const Corpus corpus = jetr_test::tiny_corpus(11, 3, 3, 6);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 3;

  const TrainResult a = train(corpus, cfg);
  const TrainResult b = train(corpus, cfg);
  CHECK(save_params(a.checkpoint.params) == save_params(b.checkpoint.params));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].total_loss == b.history[i].total_loss);
    CHECK(a.history[i].contributing_pairs == b.history[i].contributing_pairs);
  }

  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  const TrainResult c = train(corpus, other);
  CHECK(save_params(a.checkpoint.params) != save_params(c.checkpoint.params));
}

TEST_CASE("epochs=0 returns the initialization") {
  const Corpus corpus = jetr_test::tiny_corpus(12, 2, 3, 6);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 0;
  const TrainResult r = train(corpus, cfg);
  CHECK(r.history.empty());
  CHECK(r.checkpoint.step == 0);
  const EnhancerParams fresh = init_enhancer(
      cfg.seed, EnhancerDims{6, cfg.d_h1, cfg.d_h2, 6});
  CHECK(save_params(r.checkpoint.params) == save_params(fresh));
}

TEST_CASE("training loss is finite and recorded") {
  const Corpus corpus = jetr_test::tiny_corpus(13, 3, 4, 6);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 4;
  const TrainResult r = train(corpus, cfg);
  CHECK_FALSE(r.history.empty());
  std::size_t expected_step = 1;
  for (const StepRecord& rec : r.history) {
    CHECK(rec.step == expected_step++);
    CHECK(std::isfinite(rec.rank_loss));
    CHECK(std::isfinite(rec.gen_loss_mean));
    CHECK(std::isfinite(rec.total_loss));
  }
  CHECK(r.checkpoint.step == r.history.size());
}

TEST_CASE("resume reproduces the uninterrupted trajectory") {
  const Corpus corpus = jetr_test::tiny_corpus(14, 3, 3, 6);
  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 4;
  const TrainResult full = train(corpus, cfg);

  TrainConfig half = cfg;
  half.epochs = 2;
  const TrainResult first = train(corpus, half);
  const TrainResult second = train(corpus, cfg, &first.checkpoint);
  CHECK(save_params(second.checkpoint.params) ==
        save_params(full.checkpoint.params));
  CHECK(second.checkpoint.step == full.checkpoint.step);

  // Resume guards: wrong corpus fingerprint, wrong config.
  Checkpoint tampered = first.checkpoint;
  tampered.corpus_fingerprint ^= 1;
  CHECK_THROWS_AS((void)train(corpus, cfg, &tampered), Error);
  TrainConfig wrong = cfg;
  wrong.seed += 1;
  CHECK_THROWS_AS((void)train(corpus, wrong, &first.checkpoint), Error);
}

TEST_CASE("checkpoint round trip is byte exact") {
  const Corpus corpus = jetr_test::tiny_corpus(15, 2, 3, 6);
  TrainConfig cfg = tiny_cfg();
  const TrainResult r = train(corpus, cfg);

  jetr_test::TempDir dir("ckpt");
  const auto path = dir.path() / "model.jetr-ckpt";
  save_checkpoint(r.checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  const auto path2 = dir.path() / "model2.jetr-ckpt";
  save_checkpoint(loaded, path2);
  CHECK(file_bytes(path) == file_bytes(path2));

  CHECK(loaded.step == r.checkpoint.step);
  CHECK(loaded.corpus_fingerprint == corpus.fingerprint);
  CHECK(loaded.config.batch_size == cfg.batch_size);
  CHECK(loaded.config.seed == cfg.seed);
  CHECK(save_params(loaded.params) == save_params(r.checkpoint.params));
  CHECK(loaded.opt_state.step == r.checkpoint.opt_state.step);

  // Corruption checks.
  auto bytes = file_bytes(path);
  bytes.resize(bytes.size() / 2);
  std::ofstream(path, std::ios::binary | std::ios::trunc)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  CHECK_THROWS_AS((void)load_checkpoint(path), Error);
}

TEST_CASE("history csv format") {
  TrainHistory history = {{1, -0.5, 1.25, 0.75, 12}, {2, -0.25, 1.0, 0.75, 9}};
  jetr_test::TempDir dir("hist");
  const auto path = dir.path() / "history.csv";
  write_history_csv(history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "step,rank_loss,gen_loss,total_loss,pairs");
  std::getline(in, line);
  CHECK(line == "1,-0.5,1.25,0.75,12");
  std::getline(in, line);
  CHECK(line == "2,-0.25,1,0.75,9");
}

TEST_CASE("evaluate with an identity-behaving enhancer matches raw") {
  const Corpus corpus = jetr_test::tiny_corpus(16, 3, 4, 6);
  Corpus with_val = corpus;
  with_val.splits.validation = {with_val.splits.train.back()};
  with_val.splits.train.pop_back();
  with_val.rebuild_indexes();

  const EnhancerParams id = jetr_test::identity_params(6);
  const EvalResult r = evaluate(with_val, "validation", &id, 3);
  REQUIRE(r.enhanced.has_value());
  CHECK(r.raw.mrr == r.enhanced->mrr);
  CHECK(r.raw.map == r.enhanced->map);
  CHECK(r.raw.ndcg_at_k == r.enhanced->ndcg_at_k);
  CHECK(r.raw.recall_at_k == r.enhanced->recall_at_k);
  CHECK(r.raw.precision_at_k == r.enhanced->precision_at_k);
  CHECK(r.raw.f1_at_k == r.enhanced->f1_at_k);
  CHECK(r.raw.hit_rate_at_k == r.enhanced->hit_rate_at_k);
  CHECK(r.raw.mean_cosine == r.enhanced->mean_cosine);
}

TEST_CASE("evaluate counts unevaluable queries") {
  Corpus corpus = jetr_test::tiny_corpus(17, 2, 3, 6);
  // One extra query whose lesson has no documents.
  QueryRecord orphan = corpus.queries[0];
  orphan.query_id = "orphan";
  orphan.lesson_id = "L_nowhere";
  corpus.queries.push_back(orphan);
  corpus.splits.validation = {"q0", "orphan"};
  corpus.rebuild_indexes();

  const EvalResult r = evaluate(corpus, "validation", nullptr, 3);
  CHECK(r.unevaluable == 1);
  CHECK(r.per_query.size() == 1);
  CHECK(r.raw.query_count == 1);
}

TEST_CASE("evaluate puts a perfectly ranked lesson first") {
  // One lesson whose docs align exactly with the query, another pointing
  // elsewhere.
  Corpus corpus;
  for (int i = 0; i < 3; ++i) {
    DocRecord d;
    d.doc_id = "good" + std::to_string(i);
    d.lesson_id = "L0";
    d.embedding = {1.0, 0.0, 0.0};
    corpus.store.insert(std::move(d));
  }
  for (int i = 0; i < 3; ++i) {
    DocRecord d;
    d.doc_id = "bad" + std::to_string(i);
    d.lesson_id = "L1";
    d.embedding = {0.0, 1.0, 0.0};
    corpus.store.insert(std::move(d));
  }
  QueryRecord q;
  q.query_id = "q";
  q.qtype = QuestionType::NdqMc;
  q.choice_count = 4;
  q.correct_index = 0;
  q.lesson_id = "L0";
  q.text_embedding = {1.0, 0.05, 0.0};
  corpus.queries.push_back(q);
  corpus.splits.train = {"q"};
  corpus.splits.validation = {"q"};
  corpus.rebuild_indexes();

  const EvalResult r = evaluate(corpus, "validation", nullptr, 3);
  CHECK(r.raw.mrr == 1.0);
  CHECK(r.raw.hit_rate_at_k == 1.0);
  CHECK(r.raw.recall_at_k == 1.0);

  CHECK_THROWS_AS((void)evaluate(corpus, "test", nullptr, 3), Error);
  CHECK_THROWS_AS((void)evaluate(corpus, "bogus", nullptr, 3), Error);
}

TEST_CASE("paired significance against the textbook formula") {
  // Fixed 5-pair dataset, oracle computed by the direct formula.
  const std::vector<double> a = {0.82, 0.75, 0.91, 0.68, 0.88};
  const std::vector<double> b = {0.78, 0.70, 0.85, 0.69, 0.80};
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= 5.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double expected_t = mean / std::sqrt(ss / 4.0 / 5.0);

  const TTestResult r = paired_significance(a, b);
  CHECK(r.n == 5);
  CHECK(std::abs(r.mean_diff - mean) < 1e-15);
  CHECK(std::abs(r.t_statistic - expected_t) < 1e-9);
  CHECK(r.p_value > 0.0);
  CHECK(r.p_value < 1.0);
}

TEST_CASE("paired significance sign and degenerate cases") {
  SplitMix64 rng(91);
  std::vector<double> base, shifted;
  for (int i = 0; i < 40; ++i) {
    const double v = rng.uniform(0, 1);
    base.push_back(v);
    shifted.push_back(v + 0.2 + 0.01 * rng.uniform(-1, 1));
  }
  const TTestResult up = paired_significance(shifted, base);
  CHECK(up.t_statistic > 0.0);
  CHECK(up.p_value < 0.05);
  CHECK(significance_annotation(up.p_value) == "*");

  CHECK_THROWS_AS((void)paired_significance(base, base), Error);
  try {
    (void)paired_significance(base, base);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateVariance);
  }
  const std::vector<double> short_a = {1.0};
  const std::vector<double> short_b = {0.5};
  CHECK_THROWS_AS((void)paired_significance(short_a, short_b), Error);
  const std::vector<double> uneven = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS((void)paired_significance(uneven, base), Error);
}

TEST_CASE("significance annotations") {
  CHECK(significance_annotation(0.01) == "*");
  CHECK(significance_annotation(0.049) == "*");
  CHECK(significance_annotation(0.07) == "†");
  CHECK(significance_annotation(0.099) == "†");
  CHECK(significance_annotation(0.2) == "");
}

TEST_CASE("frozen generator contract") {
  // Training never touches the logit records.
  jetr_test::TempDir dir("frozen");
  SyntheticConfig scfg;
  scfg.lessons = 4;
  scfg.docs_per_lesson = 4;
  scfg.queries_per_lesson = 2;
  scfg.dim = 12;
  scfg.signal_dim = 4;
  const Corpus corpus = synth_generate(scfg, dir.path());
  const auto logits_before = file_bytes(dir.path() / kLogitsFile);
  const std::vector<LogitRecord> records_before = corpus.logits;

  TrainConfig cfg = tiny_cfg();
  cfg.epochs = 3;
  const TrainResult r = train(corpus, cfg);
  (void)r;
  CHECK(file_bytes(dir.path() / kLogitsFile) == logits_before);
  REQUIRE(corpus.logits.size() == records_before.size());
  for (std::size_t i = 0; i < corpus.logits.size(); ++i) {
    CHECK(corpus.logits[i].choice_logits ==
          records_before[i].choice_logits);
  }
}

}  // TEST_SUITE
