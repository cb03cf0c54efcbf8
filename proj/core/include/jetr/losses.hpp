#pragma once

// Scoring and loss functions: the enhanced cosine score, its [0,2] report
// mapping, sigmoid contrastive logits, the indicator-gated pairwise ranking
// loss with analytic score gradients, generator cross-entropy over
// precomputed answer-choice logits, and the combined objective.

#include <span>
#include <string>
#include <vector>

#include "jetr/enhancer.hpp"
#include "jetr/linalg.hpp"

namespace jetr {

// One (d_i, d_j) comparison for a query: enhanced scores plus the frozen
// generator's cross-entropy losses for each document's context.
struct PairSample {
  std::string query_id;
  std::string doc_i_id;
  std::string doc_j_id;
  double s_hat_i = 0.0;
  double s_hat_j = 0.0;
  double gen_loss_i = 0.0;
  double gen_loss_j = 0.0;
};

struct RankLossConfig {
  // Clamp for the log branch: log(1 - C) is evaluated at C <= 1 - epsilon.
  double epsilon = 1e-6;
};

// Generator-loss differences within this tolerance are treated as ties and
// excluded from the ranking loss.
inline constexpr double kTieTolerance = 1e-12;

enum class PairIndicator {
  IncludeIPreferred,  // gate open, indicator = 1
  IncludeJPreferred,  // gate open, indicator = 0
  Excluded,           // tied generator losses, gate closed
};

double sigmoid(double t);

// Cosine similarity of the enhanced embeddings; the reranker's score.
double enhanced_score(const EnhancerParams& params, const Vector& q_emb,
                      const Vector& d_emb);

// Affine map of a score from [-1, 1] onto the published [0, 2] range.
double report_score(double s_hat);

// C = sigmoid(S_i) - sigmoid(S_j).
//
// Note the deliberate asymmetry downstream: when i is preferred the pair
// contributes C linearly, when j is preferred it contributes log(1 - C).
// The two branches are not mirror images of each other.
double contrastive_logit(double s_hat_i, double s_hat_j);

// L_i = gen_loss_i - gen_loss_j.
double gen_loss_diff(double gen_loss_i, double gen_loss_j);

// L_i < 0 means d_i lowers the generator's loss more, so d_i is preferred.
PairIndicator pair_indicator(double l_i);

// F = C when i is preferred, log(1 - min(C, 1 - epsilon)) when j is.
// Excluded pairs must not reach this function.
double pair_f(PairIndicator indicator, double c, const RankLossConfig& cfg);

struct PairGrad {
  double wrt_s_i = 0.0;
  double wrt_s_j = 0.0;
};

struct RankLossResult {
  double loss = 0.0;
  // Aligned with the input pair sequence; excluded pairs hold zeros.
  std::vector<PairGrad> grad_wrt_s;
  std::size_t contributing = 0;
};

// loss = -(1/M) * sum of F over contributing pairs, M = contributing pair
// count. Empty or all-tied input yields loss 0 with zero gradients.
RankLossResult rank_loss(std::span<const PairSample> pairs,
                         const RankLossConfig& cfg = {});

// -log softmax(choice_logits)[correct_index], computed with a max-shifted
// log-sum-exp. Requires at least two choices.
double gen_cross_entropy(const Vector& choice_logits,
                         std::size_t correct_index);

// rank + lambda_gen * gen. The gen term carries no gradient with respect
// to the enhancer: the logits behind it are precomputed constants.
double total_loss(double rank, double gen, double lambda_gen);

}  // namespace jetr
