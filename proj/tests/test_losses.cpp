#include <cmath>

#include "doctest.h"
#include "jetr/losses.hpp"
#include "test_util.hpp"

using namespace jetr;

namespace {

PairSample pair_with(double s_i, double s_j, double gl_i, double gl_j) {
  PairSample p;
  p.query_id = "q";
  p.doc_i_id = "a";
  p.doc_j_id = "b";
  p.s_hat_i = s_i;
  p.s_hat_j = s_j;
  p.gen_loss_i = gl_i;
  p.gen_loss_j = gl_j;
  return p;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("enhanced_score basic cases") {
  const EnhancerParams id = jetr_test::identity_params(2);
  // Identity net on nonnegative inputs reproduces the raw cosine.
  CHECK(enhanced_score(id, {1.0, 0.0}, {1.0, 1.0}) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(enhanced_score(id, {0.3, 0.7}, {0.3, 0.7}) ==
        doctest::Approx(1.0));
  CHECK(enhanced_score(id, {0.2, 0.9}, {0.4, 0.5}) ==
        doctest::Approx(cosine({0.2, 0.9}, {0.4, 0.5})).epsilon(1e-12));

  // All-zero parameters enhance everything to the zero vector.
  const EnhancerParams zero = make_zero_params(EnhancerDims{2, 2, 2, 2});
  CHECK_THROWS_AS((void)enhanced_score(zero, {1, 0}, {0, 1}), Error);
}

TEST_CASE("report_score endpoints and domain") {
  CHECK(report_score(1.0) == 2.0);
  CHECK(report_score(-1.0) == 0.0);
  CHECK(report_score(0.0) == 1.0);
  CHECK_THROWS_AS((void)report_score(1.5), Error);
  CHECK_THROWS_AS((void)report_score(-1.0001), Error);
}

TEST_CASE("contrastive_logit values and antisymmetry") {
  CHECK(contrastive_logit(0.4, 0.4) == 0.0);
  // sigma(1) - sigma(0), computed independently.
  const double expected = 1.0 / (1.0 + std::exp(-1.0)) - 0.5;
  CHECK(contrastive_logit(1.0, 0.0) ==
        doctest::Approx(expected).epsilon(1e-15));
  CHECK(std::abs(contrastive_logit(1.0, 0.0) - 0.231059) < 1e-6);

  SplitMix64 rng(31);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(-1, 1);
    const double b = rng.uniform(-1, 1);
    CHECK(contrastive_logit(a, b) ==
          doctest::Approx(-contrastive_logit(b, a)).epsilon(1e-15));
  }
}

TEST_CASE("gen_loss_diff") {
  CHECK(gen_loss_diff(0.4, 0.4) == 0.0);
  CHECK(gen_loss_diff(0.2, 0.7) == doctest::Approx(-0.5));
  CHECK(gen_loss_diff(0.7, 0.2) == doctest::Approx(0.5));
}

TEST_CASE("pair_indicator gating") {
  CHECK(pair_indicator(-0.5) == PairIndicator::IncludeIPreferred);
  CHECK(pair_indicator(0.5) == PairIndicator::IncludeJPreferred);
  CHECK(pair_indicator(0.0) == PairIndicator::Excluded);
  CHECK(pair_indicator(5e-13) == PairIndicator::Excluded);
  CHECK(pair_indicator(-5e-13) == PairIndicator::Excluded);
  CHECK(pair_indicator(2e-12) == PairIndicator::IncludeJPreferred);
}

TEST_CASE("pair_f branches, clamp, excluded") {
  const RankLossConfig cfg;
  const double c = contrastive_logit(1.0, 0.0);
  CHECK(pair_f(PairIndicator::IncludeIPreferred, c, cfg) == c);

  const double log_branch = pair_f(PairIndicator::IncludeJPreferred, c, cfg);
  CHECK(log_branch == doctest::Approx(std::log(1.0 - c)).epsilon(1e-15));
  CHECK(std::abs(log_branch - (-0.262740487449489)) < 1e-6);

  // At C = 1 the clamp keeps the log finite.
  const double clamped = pair_f(PairIndicator::IncludeJPreferred, 1.0, cfg);
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(std::log(cfg.epsilon)).epsilon(1e-9));

  CHECK_THROWS_AS((void)pair_f(PairIndicator::Excluded, 0.0, cfg), Error);
}

TEST_CASE("rank_loss trivial inputs") {
  CHECK(rank_loss({}).loss == 0.0);

  std::vector<PairSample> tied = {pair_with(0.5, -0.2, 0.7, 0.7),
                                  pair_with(0.1, 0.9, 0.3, 0.3)};
  const RankLossResult r = rank_loss(tied);
  CHECK(r.loss == 0.0);
  CHECK(r.contributing == 0);
  for (const PairGrad& g : r.grad_wrt_s) {
    CHECK(g.wrt_s_i == 0.0);
    CHECK(g.wrt_s_j == 0.0);
  }
}

TEST_CASE("rank_loss single-pair value and gradient") {
  // i preferred (lower generator loss), S_i = 1, S_j = 0.
  std::vector<PairSample> pairs = {pair_with(1.0, 0.0, 0.1, 0.9)};
  const RankLossResult r = rank_loss(pairs);
  CHECK(r.contributing == 1);
  CHECK(std::abs(r.loss - (-0.231059)) < 1e-6);
  const double expected =
      -(1.0 / (1.0 + std::exp(-1.0)) - 0.5);
  CHECK(r.loss == doctest::Approx(expected).epsilon(1e-15));

  // Gradient at S_i = 0: sigma'(0) = 0.25 exactly.
  std::vector<PairSample> at_zero = {pair_with(0.0, 0.7, 0.1, 0.9)};
  const RankLossResult g = rank_loss(at_zero);
  CHECK(g.grad_wrt_s[0].wrt_s_i == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("rank_loss gradient matches finite differences") {
  SplitMix64 rng(41);
  const RankLossConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 6;
    std::vector<PairSample> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      pairs.push_back(pair_with(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                rng.uniform(0, 2), rng.uniform(0, 2)));
    }
    const RankLossResult r = rank_loss(pairs, cfg);
    for (std::size_t i = 0; i < n; ++i) {
      auto loss_of = [&] { return rank_loss(pairs, cfg).loss; };
      const double fd_i =
          jetr_test::central_difference(pairs[i].s_hat_i, loss_of, 1e-6);
      const double fd_j =
          jetr_test::central_difference(pairs[i].s_hat_j, loss_of, 1e-6);
      CHECK(jetr_test::grads_close(r.grad_wrt_s[i].wrt_s_i, fd_i, 1e-6,
                                   1e-10));
      CHECK(jetr_test::grads_close(r.grad_wrt_s[i].wrt_s_j, fd_j, 1e-6,
                                   1e-10));
    }
  }
}

TEST_CASE("rank_loss swap symmetry and descent direction") {
  SplitMix64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const double s_i = rng.uniform(-1, 1);
    const double s_j = rng.uniform(-1, 1);
    double gl_i = rng.uniform(0, 2);
    double gl_j = rng.uniform(0, 2);
    if (std::abs(gl_i - gl_j) <= kTieTolerance) gl_i += 0.1;

    // Swapping (i, j) flips the indicator but names the same preferred doc.
    const bool i_pref =
        pair_indicator(gen_loss_diff(gl_i, gl_j)) ==
        PairIndicator::IncludeIPreferred;
    const bool j_pref_swapped =
        pair_indicator(gen_loss_diff(gl_j, gl_i)) ==
        PairIndicator::IncludeJPreferred;
    CHECK(i_pref == j_pref_swapped);

    // The preferred document's score gradient always points downhill.
    std::vector<PairSample> pairs = {pair_with(s_i, s_j, gl_i, gl_j)};
    const RankLossResult r = rank_loss(pairs);
    const double g_pref =
        i_pref ? r.grad_wrt_s[0].wrt_s_i : r.grad_wrt_s[0].wrt_s_j;
    CHECK(g_pref < 0.0);
  }
}

TEST_CASE("rank_loss is permutation invariant") {
  SplitMix64 rng(43);
  std::vector<PairSample> pairs;
  for (int i = 0; i < 8; ++i) {
    pairs.push_back(pair_with(rng.uniform(-1, 1), rng.uniform(-1, 1),
                              rng.uniform(0, 2), rng.uniform(0, 2)));
  }
  const double base = rank_loss(pairs).loss;
  std::vector<PairSample> shuffled = {pairs[5], pairs[2], pairs[7], pairs[0],
                                      pairs[3], pairs[6], pairs[1], pairs[4]};
  CHECK(rank_loss(shuffled).loss == doctest::Approx(base).epsilon(1e-15));
}

TEST_CASE("gen_cross_entropy values") {
  CHECK(gen_cross_entropy({1.0, 1.0}, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::abs(gen_cross_entropy({1.0, 1.0}, 0) - 0.693147) < 1e-6);

  const double expected = std::log(1.0 + std::exp(-2.0));
  CHECK(gen_cross_entropy({2.0, 0.0}, 0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(gen_cross_entropy({2.0, 0.0}, 0) - 0.126928) < 1e-6);

  CHECK(gen_cross_entropy({200.0, 0.0, 0.0}, 0) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gen_cross_entropy invariances and errors") {
  SplitMix64 rng(44);
  for (int i = 0; i < 100; ++i) {
    const std::size_t k = 2 + rng.next_u64() % 5;
    Vector s = jetr_test::random_vector(rng, k, -3, 3);
    const std::size_t y = rng.next_u64() % k;
    const double base = gen_cross_entropy(s, y);
    CHECK(base >= 0.0);
    const double c = rng.uniform(-10, 10);
    Vector shifted = s;
    for (double& v : shifted) v += c;
    CHECK(std::abs(gen_cross_entropy(shifted, y) - base) < 1e-12);
  }
  CHECK_THROWS_AS((void)gen_cross_entropy({1.0}, 0), Error);
  CHECK_THROWS_AS((void)gen_cross_entropy({1.0, 2.0}, 2), Error);
}

TEST_CASE("gen_cross_entropy numerical stability") {
  // Agreement with the unshifted closed form while it is representable.
  SplitMix64 rng(45);
  for (int i = 0; i < 200; ++i) {
    Vector s = jetr_test::random_vector(rng, 4, -50, 50);
    const std::size_t y = rng.next_u64() % 4;
    double denom = 0.0;
    for (double v : s) denom += std::exp(v);
    const double direct = -std::log(std::exp(s[y]) / denom);
    CHECK(std::abs(gen_cross_entropy(s, y) - direct) <
          1e-12 * std::max(1.0, std::abs(direct)));
  }
  // Still finite far beyond the overflow range of the direct form.
  CHECK(std::isfinite(gen_cross_entropy({1e4, -1e4, 0.0}, 1)));
  CHECK(std::isfinite(gen_cross_entropy({-1e4, 1e4}, 0)));
}

TEST_CASE("total_loss combination") {
  CHECK(total_loss(0.42, 3.0, 0.0) == 0.42);
  CHECK(total_loss(0.3, 0.7, 1.0) == doctest::Approx(1.0));
  CHECK(total_loss(0.3, 0.7, 2.0) == doctest::Approx(1.7));
  CHECK_THROWS_AS((void)total_loss(0.0, 0.0, -1.0), Error);
}

}  // TEST_SUITE
