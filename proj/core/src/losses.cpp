#include "jetr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace jetr {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

namespace {

double sigmoid_derivative(double t) {
  const double s = sigmoid(t);
  return s * (1.0 - s);
}

}  // namespace

double enhanced_score(const EnhancerParams& params, const Vector& q_emb,
                      const Vector& d_emb) {
  const Vector zq = enhance(params, q_emb);
  const Vector zd = enhance(params, d_emb);
  return cosine(zq, zd);
}

double report_score(double s_hat) {
  if (!(s_hat >= -1.0 && s_hat <= 1.0)) {
    fail(ErrorKind::InvalidArgument,
         "report_score: input " + std::to_string(s_hat) +
             " outside [-1, 1]");
  }
  return s_hat + 1.0;
}

double contrastive_logit(double s_hat_i, double s_hat_j) {
  return sigmoid(s_hat_i) - sigmoid(s_hat_j);
}

double gen_loss_diff(double gen_loss_i, double gen_loss_j) {
  return gen_loss_i - gen_loss_j;
}

PairIndicator pair_indicator(double l_i) {
  if (std::abs(l_i) <= kTieTolerance) return PairIndicator::Excluded;
  return l_i < 0.0 ? PairIndicator::IncludeIPreferred
                   : PairIndicator::IncludeJPreferred;
}

double pair_f(PairIndicator indicator, double c, const RankLossConfig& cfg) {
  switch (indicator) {
    case PairIndicator::IncludeIPreferred:
      return c;
    case PairIndicator::IncludeJPreferred: {
      const double c_bar = std::min(c, 1.0 - cfg.epsilon);
      return std::log(1.0 - c_bar);
    }
    case PairIndicator::Excluded:
      break;
  }
  fail(ErrorKind::InvalidArgument, "pair_f: excluded pair has no F value");
}

RankLossResult rank_loss(std::span<const PairSample> pairs,
                         const RankLossConfig& cfg) {
  RankLossResult result;
  result.grad_wrt_s.resize(pairs.size());

  double f_sum = 0.0;
  // dF/dC per pair, stashed so the gradient pass can reuse it.
  std::vector<double> df_dc(pairs.size(), 0.0);

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const PairSample& pair = pairs[p];
    const PairIndicator ind =
        pair_indicator(gen_loss_diff(pair.gen_loss_i, pair.gen_loss_j));
    if (ind == PairIndicator::Excluded) continue;

    const double c = contrastive_logit(pair.s_hat_i, pair.s_hat_j);
    f_sum += pair_f(ind, c, cfg);
    ++result.contributing;

    if (ind == PairIndicator::IncludeIPreferred) {
      df_dc[p] = 1.0;
    } else if (c < 1.0 - cfg.epsilon) {
      df_dc[p] = -1.0 / (1.0 - c);
    } else {
      df_dc[p] = 0.0;  // inside the clamp, F is flat
    }
  }

  if (result.contributing == 0) {
    return result;  // all excluded (or empty): loss 0, zero gradients
  }

  const double m = static_cast<double>(result.contributing);
  result.loss = -f_sum / m;

  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (df_dc[p] == 0.0) continue;
    const double scale = -df_dc[p] / m;
    result.grad_wrt_s[p].wrt_s_i = scale * sigmoid_derivative(pairs[p].s_hat_i);
    result.grad_wrt_s[p].wrt_s_j = -scale * sigmoid_derivative(pairs[p].s_hat_j);
  }
  return result;
}

double gen_cross_entropy(const Vector& choice_logits,
                         std::size_t correct_index) {
  if (choice_logits.size() < 2) {
    fail(ErrorKind::InvalidArgument,
         "gen_cross_entropy: need at least two choices");
  }
  if (correct_index >= choice_logits.size()) {
    fail(ErrorKind::InvalidArgument,
         "gen_cross_entropy: correct_index " + std::to_string(correct_index) +
             " out of range for " + std::to_string(choice_logits.size()) +
             " choices");
  }
  const double m = *std::max_element(choice_logits.begin(),
                                     choice_logits.end());
  double sum = 0.0;
  for (double s : choice_logits) {
    sum += std::exp(s - m);
  }
  return m + std::log(sum) - choice_logits[correct_index];
}

double total_loss(double rank, double gen, double lambda_gen) {
  if (lambda_gen < 0.0) {
    fail(ErrorKind::InvalidArgument, "total_loss: lambda_gen must be >= 0");
  }
  return rank + lambda_gen * gen;
}

}  // namespace jetr
