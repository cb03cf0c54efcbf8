#include "jetr/pipeline.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <unordered_set>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"

namespace jetr {

using nlohmann::json;

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) {
    fail(ErrorKind::InvalidArgument, "train: batch_size must be >= 1");
  }
  if (cfg.k_candidates < 2) {
    fail(ErrorKind::InvalidArgument, "train: k_candidates must be >= 2");
  }
  const std::size_t max_possible =
      cfg.k_candidates * (cfg.k_candidates - 1) / 2;
  if (cfg.max_pairs_per_query < 1 || cfg.max_pairs_per_query > max_possible) {
    fail(ErrorKind::InvalidArgument,
         "train: max_pairs_per_query must lie in [1, k*(k-1)/2]");
  }
  if (!(cfg.epsilon_clamp > 0.0 && cfg.epsilon_clamp < 0.5)) {
    fail(ErrorKind::InvalidArgument,
         "train: epsilon_clamp must lie in (0, 0.5)");
  }
  if (!(cfg.learning_rate > 0.0)) {
    fail(ErrorKind::InvalidArgument, "train: learning_rate must be > 0");
  }
  if (cfg.lambda_gen < 0.0) {
    fail(ErrorKind::InvalidArgument, "train: lambda_gen must be >= 0");
  }
  if (cfg.d_h1 < 1 || cfg.d_h2 < 1) {
    fail(ErrorKind::InvalidArgument, "train: hidden widths must be >= 1");
  }
  OptConfig opt = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  validate(opt);
}

TrainConfig train_config_from_json_file(const std::filesystem::path& path,
                                        const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorKind::Io, "cannot open train config " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::ParseError,
         "train config " + path.string() + ": " + e.what());
  }
  TrainConfig cfg = base;
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.lambda_gen = j.value("lambda_gen", cfg.lambda_gen);
  cfg.k_candidates = j.value("k_candidates", cfg.k_candidates);
  cfg.max_pairs_per_query =
      j.value("max_pairs_per_query", cfg.max_pairs_per_query);
  cfg.epsilon_clamp = j.value("epsilon_clamp", cfg.epsilon_clamp);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.deterministic = j.value("deterministic", cfg.deterministic);
  cfg.strict_logits = j.value("strict_logits", cfg.strict_logits);
  cfg.d_h1 = j.value("d_h1", cfg.d_h1);
  cfg.d_h2 = j.value("d_h2", cfg.d_h2);
  cfg.optimizer.weight_decay =
      j.value("weight_decay", cfg.optimizer.weight_decay);
  cfg.optimizer.beta1 = j.value("beta1", cfg.optimizer.beta1);
  cfg.optimizer.beta2 = j.value("beta2", cfg.optimizer.beta2);
  cfg.optimizer.eps = j.value("adam_eps", cfg.optimizer.eps);
  cfg.optimizer.max_grad_norm =
      j.value("max_grad_norm", cfg.optimizer.max_grad_norm);
  validate(cfg);
  return cfg;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    fail(ErrorKind::Io, "cannot write history " + path.string());
  }
  out << "step,rank_loss,gen_loss,total_loss,pairs\n";
  for (const StepRecord& r : history) {
    out << r.step << ',' << fmt_double(r.rank_loss) << ','
        << fmt_double(r.gen_loss_mean) << ',' << fmt_double(r.total_loss)
        << ',' << r.contributing_pairs << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoint serialization

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

constexpr char kCkptMagic[8] = {'J', 'E', 'T', 'R', 'C', 'K', 'P', '1'};

void append_raw(std::vector<std::uint8_t>& out, const void* src,
                std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(src);
  out.insert(out.end(), p, p + n);
}

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, T value) {
  append_raw(out, &value, sizeof(T));
}

class CkptReader {
 public:
  explicit CkptReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      fail(ErrorKind::CorruptCheckpoint, "training checkpoint truncated");
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::uint8_t> read_block(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorKind::CorruptCheckpoint, "training checkpoint truncated");
    }
    auto block = bytes_.subspan(pos_, n);
    pos_ += n;
    return block;
  }

  void read_doubles(std::span<double> out) {
    const auto block = read_block(out.size() * sizeof(double));
    std::memcpy(out.data(), block.data(), block.size());
  }

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  append_raw(out, kCkptMagic, sizeof(kCkptMagic));
  append_pod<std::uint64_t>(out, ckpt.step);
  append_pod<std::uint64_t>(out, ckpt.corpus_fingerprint);

  const TrainConfig& c = ckpt.config;
  append_pod<std::uint64_t>(out, c.batch_size);
  append_pod<double>(out, c.learning_rate);
  append_pod<std::uint64_t>(out, c.epochs);
  append_pod<double>(out, c.lambda_gen);
  append_pod<std::uint64_t>(out, c.k_candidates);
  append_pod<std::uint64_t>(out, c.max_pairs_per_query);
  append_pod<double>(out, c.epsilon_clamp);
  append_pod<std::uint64_t>(out, c.seed);
  append_pod<std::uint8_t>(out, c.deterministic ? 1 : 0);
  append_pod<std::uint8_t>(out, c.strict_logits ? 1 : 0);
  append_pod<std::uint64_t>(out, c.d_h1);
  append_pod<std::uint64_t>(out, c.d_h2);
  append_pod<double>(out, c.optimizer.beta1);
  append_pod<double>(out, c.optimizer.beta2);
  append_pod<double>(out, c.optimizer.eps);
  append_pod<double>(out, c.optimizer.weight_decay);
  append_pod<double>(out, c.optimizer.max_grad_norm);

  const auto params_bytes = save_params(ckpt.params);
  append_pod<std::uint64_t>(out, params_bytes.size());
  append_raw(out, params_bytes.data(), params_bytes.size());

  append_pod<std::uint64_t>(out, ckpt.opt_state.step);
  for_each_param(ckpt.opt_state.m, [&out](std::span<const double> f, bool) {
    append_raw(out, f.data(), f.size() * sizeof(double));
  });
  for_each_param(ckpt.opt_state.v, [&out](std::span<const double> f, bool) {
    append_raw(out, f.data(), f.size() * sizeof(double));
  });

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
  }
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) {
    fail(ErrorKind::Io, "short write to " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  CkptReader reader{std::span(bytes)};

  char magic[8];
  for (char& ch : magic) ch = static_cast<char>(reader.read<std::uint8_t>());
  if (std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0) {
    fail(ErrorKind::CorruptCheckpoint, "bad training checkpoint magic");
  }

  Checkpoint ckpt;
  ckpt.step = reader.read<std::uint64_t>();
  ckpt.corpus_fingerprint = reader.read<std::uint64_t>();

  TrainConfig& c = ckpt.config;
  c.batch_size = reader.read<std::uint64_t>();
  c.learning_rate = reader.read<double>();
  c.epochs = reader.read<std::uint64_t>();
  c.lambda_gen = reader.read<double>();
  c.k_candidates = reader.read<std::uint64_t>();
  c.max_pairs_per_query = reader.read<std::uint64_t>();
  c.epsilon_clamp = reader.read<double>();
  c.seed = reader.read<std::uint64_t>();
  c.deterministic = reader.read<std::uint8_t>() != 0;
  c.strict_logits = reader.read<std::uint8_t>() != 0;
  c.d_h1 = reader.read<std::uint64_t>();
  c.d_h2 = reader.read<std::uint64_t>();
  c.optimizer.beta1 = reader.read<double>();
  c.optimizer.beta2 = reader.read<double>();
  c.optimizer.eps = reader.read<double>();
  c.optimizer.weight_decay = reader.read<double>();
  c.optimizer.max_grad_norm = reader.read<double>();
  c.optimizer.learning_rate = c.learning_rate;

  const auto params_len = reader.read<std::uint64_t>();
  ckpt.params = load_params(reader.read_block(params_len));

  ckpt.opt_state = make_opt_state(ckpt.params.dims);
  ckpt.opt_state.step = reader.read<std::uint64_t>();
  for_each_param(ckpt.opt_state.m, [&reader](std::span<double> f, bool) {
    reader.read_doubles(f);
  });
  for_each_param(ckpt.opt_state.v, [&reader](std::span<double> f, bool) {
    reader.read_doubles(f);
  });
  if (!reader.exhausted()) {
    fail(ErrorKind::CorruptCheckpoint,
         "trailing bytes after training checkpoint data");
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Pair sampling and batch gradients

namespace {

struct CandidateSet {
  Vector fused;
  std::vector<std::string> doc_ids;  // raw-cosine rank order
  std::vector<double> gen_losses;
};

CandidateSet assemble_candidates(const QueryRecord& query,
                                 const Corpus& corpus,
                                 const TrainConfig& cfg,
                                 std::vector<std::string>* warnings) {
  CandidateSet set;
  set.fused = fuse_query_embedding(query.text_embedding,
                                   query.image_embedding);
  const RankedList ranked =
      corpus.store.topk(set.fused, cfg.k_candidates, std::nullopt, nullptr);
  for (const RankedEntry& entry : ranked) {
    const LogitRecord* rec = corpus.find_logits(query.query_id, entry.doc_id);
    if (rec == nullptr) {
      if (cfg.strict_logits) {
        fail(ErrorKind::DanglingReference,
             "no logits for (" + query.query_id + ", " + entry.doc_id + ")");
      }
      const std::string message = "no logits for (" + query.query_id + ", " +
                                  entry.doc_id + "), candidate skipped";
      if (warnings != nullptr) {
        warnings->push_back(message);
      } else {
        std::cerr << "warning: " << message << "\n";
      }
      continue;
    }
    set.doc_ids.push_back(entry.doc_id);
    set.gen_losses.push_back(
        gen_cross_entropy(rec->choice_logits, query.correct_index));
  }
  return set;
}

// Rank-lexicographic (i, j) enumeration truncated at max_pairs; tied
// generator losses are dropped after the cut.
std::vector<std::pair<std::size_t, std::size_t>> build_pair_indices(
    const std::vector<double>& gen_losses, std::size_t max_pairs) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t enumerated = 0;
  for (std::size_t i = 0; i + 1 < gen_losses.size() && enumerated < max_pairs;
       ++i) {
    for (std::size_t j = i + 1;
         j < gen_losses.size() && enumerated < max_pairs; ++j) {
      ++enumerated;
      if (std::abs(gen_losses[i] - gen_losses[j]) <= kTieTolerance) continue;
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

}  // namespace

std::vector<PairSample> sample_pairs(const QueryRecord& query,
                                     const Corpus& corpus,
                                     const EnhancerParams& params,
                                     const TrainConfig& cfg,
                                     std::vector<std::string>* warnings) {
  validate(cfg);
  const CandidateSet set = assemble_candidates(query, corpus, cfg, warnings);

  const Vector zq = enhance(params, set.fused);
  std::vector<double> s_hat(set.doc_ids.size());
  for (std::size_t c = 0; c < set.doc_ids.size(); ++c) {
    const Vector zd = enhance(params, corpus.store.doc(set.doc_ids[c]).embedding);
    s_hat[c] = cosine(zq, zd);
  }

  std::vector<PairSample> out;
  for (const auto& [i, j] :
       build_pair_indices(set.gen_losses, cfg.max_pairs_per_query)) {
    PairSample p;
    p.query_id = query.query_id;
    p.doc_i_id = set.doc_ids[i];
    p.doc_j_id = set.doc_ids[j];
    p.s_hat_i = s_hat[i];
    p.s_hat_j = s_hat[j];
    p.gen_loss_i = set.gen_losses[i];
    p.gen_loss_j = set.gen_losses[j];
    out.push_back(std::move(p));
  }
  return out;
}

BatchLoss batch_loss_and_grad(std::span<const std::string> query_ids,
                              const Corpus& corpus,
                              const EnhancerParams& params,
                              const TrainConfig& cfg,
                              std::vector<std::string>* warnings) {
  if (query_ids.empty()) {
    fail(ErrorKind::EmptyInput, "batch_loss_and_grad: empty batch");
  }

  struct QueryWork {
    ForwardCache q_cache;
    std::vector<ForwardCache> cand_caches;
    std::vector<double> s_hat;
    std::vector<double> gen_losses;
  };

  std::vector<QueryWork> work;
  work.reserve(query_ids.size());
  std::vector<PairSample> all_pairs;
  struct PairOrigin {
    std::size_t query;
    std::size_t cand_i;
    std::size_t cand_j;
  };
  std::vector<PairOrigin> origins;
  double gen_sum = 0.0;
  std::size_t gen_count = 0;

  for (const std::string& qid : query_ids) {
    const QueryRecord* query = corpus.find_query(qid);
    if (query == nullptr) {
      fail(ErrorKind::DanglingReference,
           "batch references unknown query '" + qid + "'");
    }
    CandidateSet set = assemble_candidates(*query, corpus, cfg, warnings);

    QueryWork w;
    enhance(params, set.fused, &w.q_cache);
    w.cand_caches.resize(set.doc_ids.size());
    w.s_hat.resize(set.doc_ids.size());
    for (std::size_t c = 0; c < set.doc_ids.size(); ++c) {
      enhance(params, corpus.store.doc(set.doc_ids[c]).embedding,
              &w.cand_caches[c]);
      w.s_hat[c] = cosine(w.q_cache.z, w.cand_caches[c].z);
      gen_sum += set.gen_losses[c];
      ++gen_count;
    }
    w.gen_losses = set.gen_losses;

    const std::size_t work_idx = work.size();
    for (const auto& [i, j] :
         build_pair_indices(set.gen_losses, cfg.max_pairs_per_query)) {
      PairSample p;
      p.query_id = query->query_id;
      p.doc_i_id = set.doc_ids[i];
      p.doc_j_id = set.doc_ids[j];
      p.s_hat_i = w.s_hat[i];
      p.s_hat_j = w.s_hat[j];
      p.gen_loss_i = set.gen_losses[i];
      p.gen_loss_j = set.gen_losses[j];
      all_pairs.push_back(std::move(p));
      origins.push_back({work_idx, i, j});
    }
    work.push_back(std::move(w));
  }

  const RankLossResult rank =
      rank_loss(std::span(all_pairs), RankLossConfig{cfg.epsilon_clamp});

  BatchLoss out;
  out.rank_loss = rank.loss;
  out.gen_loss_mean = gen_count > 0 ? gen_sum / static_cast<double>(gen_count)
                                    : 0.0;
  out.total_loss = total_loss(rank.loss, out.gen_loss_mean, cfg.lambda_gen);
  out.contributing_pairs = rank.contributing;
  out.grads = make_zero_params(params.dims);

  if (!std::isfinite(out.total_loss)) {
    fail(ErrorKind::NonFinite,
         "non-finite batch loss (rank=" + std::to_string(rank.loss) +
             ", gen=" + std::to_string(out.gen_loss_mean) + ")");
  }

  // Fold per-pair score gradients into per-(query, candidate) dL/dS.
  std::vector<Vector> ds_acc(work.size());
  for (std::size_t w = 0; w < work.size(); ++w) {
    ds_acc[w].assign(work[w].s_hat.size(), 0.0);
  }
  for (std::size_t p = 0; p < all_pairs.size(); ++p) {
    const PairGrad& g = rank.grad_wrt_s[p];
    const PairOrigin& o = origins[p];
    ds_acc[o.query][o.cand_i] += g.wrt_s_i;
    ds_acc[o.query][o.cand_j] += g.wrt_s_j;
  }

  // Chain through the cosine into both enhancement paths, then through the
  // enhancer itself.
  const std::size_t d_out = params.dims.d_out;
  for (std::size_t w = 0; w < work.size(); ++w) {
    QueryWork& qw = work[w];
    Vector g_zq(d_out, 0.0);
    bool q_touched = false;
    for (std::size_t c = 0; c < qw.s_hat.size(); ++c) {
      const double ds = ds_acc[w][c];
      if (ds == 0.0) continue;
      Vector g_zd(d_out, 0.0);
      cosine_grad_accum(qw.q_cache.z, qw.cand_caches[c].z, ds, g_zq, g_zd);
      q_touched = true;
      enhancer_backward(params, qw.cand_caches[c], g_zd, out.grads);
    }
    if (q_touched) {
      enhancer_backward(params, qw.q_cache, g_zq, out.grads);
    }
  }
  return out;
}

StepRecord train_step(std::span<const std::string> query_ids,
                      const Corpus& corpus, EnhancerParams& params,
                      OptState& opt_state, const TrainConfig& cfg,
                      std::size_t step_index) {
  const BatchLoss batch =
      batch_loss_and_grad(query_ids, corpus, params, cfg);

  OptConfig opt = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  adamw_step(params, batch.grads, opt_state, opt);

  StepRecord record;
  record.step = step_index;
  record.rank_loss = batch.rank_loss;
  record.gen_loss_mean = batch.gen_loss_mean;
  record.total_loss = batch.total_loss;
  record.contributing_pairs = batch.contributing_pairs;
  return record;
}

namespace {

void shuffle_ids(std::vector<std::string>& ids, SplitMix64& rng) {
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(ids[i - 1], ids[j]);
  }
}

bool config_compatible(const TrainConfig& a, const TrainConfig& b) {
  return a.batch_size == b.batch_size &&
         a.learning_rate == b.learning_rate && a.lambda_gen == b.lambda_gen &&
         a.k_candidates == b.k_candidates &&
         a.max_pairs_per_query == b.max_pairs_per_query &&
         a.epsilon_clamp == b.epsilon_clamp && a.seed == b.seed &&
         a.deterministic == b.deterministic &&
         a.strict_logits == b.strict_logits && a.d_h1 == b.d_h1 &&
         a.d_h2 == b.d_h2 && a.optimizer.beta1 == b.optimizer.beta1 &&
         a.optimizer.beta2 == b.optimizer.beta2 &&
         a.optimizer.eps == b.optimizer.eps &&
         a.optimizer.weight_decay == b.optimizer.weight_decay &&
         a.optimizer.max_grad_norm == b.optimizer.max_grad_norm;
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const Checkpoint* resume,
                  const std::function<void(const Checkpoint&)>& on_epoch_end) {
  validate(cfg);
  if (corpus.splits.train.empty()) {
    fail(ErrorKind::EmptyInput, "train: empty train split");
  }
  if (corpus.store.size() == 0) {
    fail(ErrorKind::EmptyStore, "train: empty document store");
  }

  const EnhancerDims dims{corpus.store.dim(), cfg.d_h1, cfg.d_h2,
                          corpus.store.dim()};
  const std::size_t steps_per_epoch =
      (corpus.splits.train.size() + cfg.batch_size - 1) / cfg.batch_size;

  TrainResult result;
  EnhancerParams params;
  OptState opt_state;
  std::size_t step = 0;
  std::size_t start_epoch = 0;

  if (resume != nullptr) {
    if (!config_compatible(resume->config, cfg)) {
      fail(ErrorKind::InvalidArgument,
           "resume: checkpoint config does not match");
    }
    if (resume->corpus_fingerprint != corpus.fingerprint) {
      fail(ErrorKind::InvalidArgument,
           "resume: checkpoint was trained on a different corpus");
    }
    if (resume->params.dims != dims) {
      fail(ErrorKind::DimMismatch, "resume: enhancer dims do not match");
    }
    if (resume->step % steps_per_epoch != 0) {
      fail(ErrorKind::InvalidArgument,
           "resume: checkpoint is not at an epoch boundary");
    }
    params = resume->params;
    opt_state = resume->opt_state;
    step = resume->step;
    start_epoch = resume->step / steps_per_epoch;
  } else {
    params = init_enhancer(cfg.seed, dims);
    opt_state = make_opt_state(dims);
  }

  auto snapshot = [&](std::uint64_t at_step) {
    Checkpoint ckpt;
    ckpt.params = params;
    ckpt.opt_state = opt_state;
    ckpt.config = cfg;
    ckpt.step = at_step;
    ckpt.corpus_fingerprint = corpus.fingerprint;
    return ckpt;
  };

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    // Per-epoch shuffle stream derived from (seed, epoch) so a resumed run
    // replays the exact same order.
    SplitMix64 rng(cfg.seed ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
    std::vector<std::string> order = corpus.splits.train;
    shuffle_ids(order, rng);

    for (std::size_t begin = 0; begin < order.size();
         begin += cfg.batch_size) {
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const std::span<const std::string> batch(order.data() + begin,
                                               end - begin);
      ++step;
      result.history.push_back(
          train_step(batch, corpus, params, opt_state, cfg, step));
    }
    if (on_epoch_end) {
      on_epoch_end(snapshot(step));
    }
  }

  result.checkpoint = snapshot(step);
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult evaluate(const Corpus& corpus, const std::string& split_name,
                    const EnhancerParams* params, std::size_t k) {
  const std::vector<std::string>& split = corpus.split(split_name);
  if (split.empty()) {
    fail(ErrorKind::EmptyInput, "evaluate: split '" + split_name +
                                    "' is empty");
  }
  if (k == 0) {
    fail(ErrorKind::InvalidArgument, "evaluate: k must be >= 1");
  }
  const std::size_t text_count = corpus.store.count(Modality::Text);
  if (text_count == 0) {
    fail(ErrorKind::EmptyStore, "evaluate: no text documents in the store");
  }

  std::unordered_set<std::string> text_ids;
  for (const DocRecord& d : corpus.store.docs()) {
    if (d.modality == Modality::Text) text_ids.insert(d.doc_id);
  }

  EvalResult result;
  std::vector<MetricsReport> raw_reports;
  std::vector<MetricsReport> enhanced_reports;

  for (const std::string& qid : split) {
    const QueryRecord* query = corpus.find_query(qid);
    if (query == nullptr) {
      fail(ErrorKind::DanglingReference,
           "evaluate: split references unknown query '" + qid + "'");
    }
    QueryJudgment judgment =
        relevance_labels(*query, std::span(corpus.store.docs()));
    std::erase_if(judgment.relevant_doc_ids, [&text_ids](const auto& id) {
      return !text_ids.contains(id);
    });
    if (judgment.relevant_doc_ids.empty()) {
      ++result.unevaluable;
      continue;
    }

    const Vector fused =
        fuse_query_embedding(query->text_embedding, query->image_embedding);
    PerQueryMetrics pq;
    pq.query_id = qid;

    const RankedList ranked_raw =
        corpus.store.topk(fused, text_count, Modality::Text, nullptr);
    pq.raw = per_query_report(ranked_raw, judgment, k);
    raw_reports.push_back(pq.raw);

    if (params != nullptr) {
      const RankedList ranked_enh =
          corpus.store.topk(fused, text_count, Modality::Text, params);
      pq.enhanced = per_query_report(ranked_enh, judgment, k);
      enhanced_reports.push_back(*pq.enhanced);
    }
    result.per_query.push_back(std::move(pq));
  }

  if (raw_reports.empty()) {
    fail(ErrorKind::EmptyInput,
         "evaluate: no evaluable queries in split '" + split_name + "'");
  }
  result.raw = aggregate(std::span(raw_reports));
  if (params != nullptr) {
    result.enhanced = aggregate(std::span(enhanced_reports));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Paired significance

TTestResult paired_significance(std::span<const double> a,
                                std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::DimMismatch, "paired_significance: unequal lengths");
  }
  const std::size_t n = a.size();
  if (n < 2) {
    fail(ErrorKind::InvalidArgument,
         "paired_significance: need at least two pairs");
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += a[i] - b[i];
  }
  mean /= static_cast<double>(n);

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double variance = ss / static_cast<double>(n - 1);
  if (variance == 0.0) {
    fail(ErrorKind::DegenerateVariance,
         "paired_significance: zero variance of differences");
  }

  TTestResult result;
  result.n = n;
  result.mean_diff = mean;
  result.t_statistic =
      mean / std::sqrt(variance / static_cast<double>(n));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  result.p_value =
      2.0 * boost::math::cdf(boost::math::complement(
                dist, std::abs(result.t_statistic)));
  return result;
}

std::string significance_annotation(double p_value) {
  if (p_value < 0.05) return "*";
  if (p_value < 0.1) return "†";  // dagger
  return "";
}

}  // namespace jetr
