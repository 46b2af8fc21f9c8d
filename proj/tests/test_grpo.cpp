#include <gtest/gtest.h>

#include <cmath>

#include "gcrl/chain_features.hpp"
#include "gcrl/grpo.hpp"
#include "support.hpp"

using namespace gcrl;
using gcrl::testutil::DensePolicy;
using gcrl::testutil::RandomDenseFeatures;

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

TEST(Advantages, WorkedExamples) {
  EXPECT_EQ(compute_advantages(std::vector<double>{3, 3, 0, 0}), (std::vector<double>{1, 1, -1, -1}));
  EXPECT_EQ(compute_advantages(std::vector<double>{3, 0}), (std::vector<double>{1, -1}));
  EXPECT_EQ(compute_advantages(std::vector<double>{1, 1, 1}), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(compute_advantages(std::vector<double>{1}), ValidationError);
}

TEST(Advantages, NormalizedForRandomGroups) {
  RngStream rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(2 + rng.below(15));
    for (auto& x : r) x = rng.below(2) ? static_cast<double>(rng.below(4)) : 5.0 * rng.uniform();
    const auto a = compute_advantages(r);
    if (pop_std(r) == 0.0) continue;
    EXPECT_NEAR(mean(a), 0.0, 1e-12);
    EXPECT_NEAR(pop_std(a), 1.0, 1e-9);
  }
}

TEST(ClippedTerm, Examples) {
  EXPECT_DOUBLE_EQ(clipped_term(1.5, 1.0, 0.2), 1.2);
  EXPECT_DOUBLE_EQ(clipped_term(0.5, -1.0, 0.2), -0.8);
  for (double r : {0.8, 0.9, 1.0, 1.1, 1.2})
    for (double a : {-2.0, 0.5, 3.0}) EXPECT_DOUBLE_EQ(clipped_term(r, a, 0.2), r * a);
}

TEST(ClippedTerm, BoundedByClipBand) {
  RngStream rng(2);
  for (int i = 0; i < 10000; ++i) {
    const double r = 0.01 + 3.0 * rng.uniform(), a = 4.0 * rng.uniform() - 2.0;
    EXPECT_LE(clipped_term(r, a, 0.2), 1.2 * std::abs(a) + 1e-15);
  }
}

TEST(Kl, K3Values) {
  EXPECT_EQ(k3(-1.3, -1.3), 0.0);
  EXPECT_NEAR(k3(std::log(2.0), 0.0), 2.0 - std::log(2.0) - 1.0, 1e-15);
  EXPECT_NEAR(k3(std::log(2.0), 0.0), 0.30685281944005469, 1e-15);
  RngStream rng(3);
  for (int i = 0; i < 10000; ++i) EXPECT_GE(k3(-5.0 * rng.uniform(), -5.0 * rng.uniform()), 0.0);
}

TEST(Kl, TermVanishesAtReference) {
  const DensePolicy pol(RandomDenseFeatures(10));
  RngStream rng(4);
  const auto params = testutil::random_params(pol, rng, 1.0);
  const Problem p = testutil::random_problem(rng);
  const Context ctx = encode_context(p);
  const auto t = pol.sample_trajectory(params, ctx, 0.7, rng);
  for (double x : kl_term(pol, params, params, ctx, t, 0.7)) EXPECT_EQ(x, 0.0);
  const auto other = testutil::random_params(pol, rng, 1.0);
  for (double x : kl_term(pol, params, other, ctx, t, 0.7)) EXPECT_GE(x, 0.0);
}

TEST(TokenRatios, IdentityAtGeneratingParams) {
  const DensePolicy pol(RandomDenseFeatures(10));
  RngStream rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto params = testutil::random_params(pol, rng, 1.0);
    const Context ctx = encode_context(testutil::random_problem(rng));
    const auto t = pol.sample_trajectory(params, ctx, 0.7, rng);
    for (double r : token_ratios(pol, params, ctx, t, 0.7)) EXPECT_NEAR(r, 1.0, 1e-12);
  }
}

TEST(TokenRatios, ForcedArithmetic) {
  // Numerator 0.2 under a constructed distribution, denominator 0.1 recorded.
  struct BiasOnly {
    std::size_t dimension() const { return 1; }
    std::uint64_t layout_hash() const { return 5; }
    void compute(const Context&, std::span<const Token>, FeatureVector& out) const { out.push_back({0, 1.0}); }
  };
  const LinearSoftmaxPolicy<BiasOnly> pol(BiasOnly{});
  auto params = pol.zero_params();
  for (std::size_t v = 0; v < kVocabSize; ++v) params.theta[v] = std::log(0.8 / 13.0);
  params.theta[3] = std::log(0.2);
  Trajectory t;
  t.tokens = {Token::D3};
  t.gen_logprobs = {std::log(0.1)};
  const auto r = token_ratios(pol, params, encode_context(make_problem("x", 1, {{Op::Add, 1}})), t, 1.0);
  EXPECT_NEAR(r[0], 2.0, 1e-12);
}

TEST(TokenRatios, MissingLogprobsRejected) {
  const DensePolicy pol(RandomDenseFeatures(4));
  Trajectory t;
  t.tokens = {Token::D1, Token::End};
  EXPECT_THROW(token_ratios(pol, pol.zero_params(), encode_context(make_problem("x", 1, {{Op::Add, 1}})), t, 1.0),
               ValidationError);
}

TEST(Objective, AtOldParamsEqualsMeanAdvantageAndVanillaGradient) {
  const DensePolicy pol(RandomDenseFeatures(10), 8);
  RngStream rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto params = testutil::random_params(pol, rng, 0.7);
    const Problem p = testutil::random_problem(rng);
    const auto g = testutil::random_group(pol, params, p, 8, rng, 0.7);
    GrpoConfig cfg;
    const auto og = grpo_objective_and_grad(pol, params, g, cfg);
    EXPECT_NEAR(og.objective, 0.0, 1e-12);
    std::vector<double> want(pol.num_params(), 0.0);
    const Context ctx = encode_context(p);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto gl = pol.grad_logprob(params, ctx, g.trajectories[i].tokens, cfg.temperature);
      const double w = g.advantages[i] / static_cast<double>(g.trajectories[i].size()) / static_cast<double>(g.size());
      for (std::size_t k = 0; k < want.size(); ++k) want[k] += w * gl[k];
    }
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(og.grad[k], want[k], 1e-12);
  }
}

TEST(Objective, EqualRewardsGiveBitwiseZeroGradient) {
  const DensePolicy pol(RandomDenseFeatures(10), 8);
  RngStream rng(7);
  const auto old = testutil::random_params(pol, rng, 0.7);
  auto params = old;
  for (auto& x : params.theta) x += 0.3;
  auto g = testutil::random_group(pol, old, testutil::random_problem(rng), 8, rng, 0.7);
  g.rewards.assign(8, 0.0);
  fill_advantages(g);
  const auto og = grpo_objective_and_grad(pol, params, g, GrpoConfig{});
  for (double x : og.grad) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(og.objective, 0.0);
}

TEST(Objective, MatchesFiniteDifferences) {
  const DensePolicy pol(RandomDenseFeatures(12), 6);
  RngStream rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto in = testutil::make_fd_instance(pol, rng, false);
    const auto og = grpo_objective_and_grad(pol, in.params, in.group, in.cfg, &in.ref);
    const double err = testutil::max_fd_rel_error(in.params, og.grad, [&](const PolicyParams& x) {
      return grpo_objective_and_grad(pol, x, in.group, in.cfg, &in.ref).objective;
    });
    EXPECT_LE(err, 1e-4) << "trial " << trial;
  }
}

TEST(Objective, Errors) {
  const DensePolicy pol(RandomDenseFeatures(4));
  RolloutGroup empty;
  EXPECT_THROW(grpo_objective_and_grad(pol, pol.zero_params(), empty, GrpoConfig{}), ValidationError);
  RngStream rng(9);
  auto g = testutil::random_group(pol, pol.zero_params(), testutil::random_problem(rng), 4, rng, 0.7);
  g.trajectories[1].tokens.clear();
  g.trajectories[1].gen_logprobs.clear();
  EXPECT_THROW(grpo_objective_and_grad(pol, pol.zero_params(), g, GrpoConfig{}), ValidationError);
}

TEST(OffPolicy, NearDeterministicExpertUnderUniformPolicy) {
  const auto pol = make_chain_policy();
  const Problem p = make_problem("e", 2, {{Op::Mul, 3}, {Op::Add, 9}});
  Trajectory t;
  t.tokens = expert_solution_tokens(p);
  t.gen_logprobs.assign(t.tokens.size(), std::log(0.99));
  const auto r = offpolicy_ratios(pol, pol.zero_params(), t, Provenance::ExternalExpert, encode_context(p), 0.7);
  double log_seq = 0.0;
  for (double x : r) {
    EXPECT_NEAR(x, (1.0 / 14.0) / 0.99, 1e-12);
    EXPECT_NEAR(x, 0.0722, 1e-4);
    log_seq += std::log(x);
  }
  EXPECT_NEAR(log_seq, static_cast<double>(r.size()) * std::log((1.0 / 14.0) / 0.99), 1e-12);
  EXPECT_THROW(offpolicy_ratios(pol, pol.zero_params(), t, Provenance::Guided, encode_context(p), 0.7), ValidationError);
}

TEST(OffPolicy, ExpertSamplerRecordsItsProbabilities) {
  const ExpertSampler ex(0.9);
  RngStream rng(10);
  const Problem p = make_problem("e", 2, {{Op::Mul, 3}, {Op::Add, 9}});
  int clean = 0;
  for (int i = 0; i < 200; ++i) {
    const auto t = ex.sample(p, rng, 32);
    for (double lp : t.gen_logprobs)
      EXPECT_TRUE(std::abs(lp - std::log(0.9)) < 1e-15 || std::abs(lp - std::log(0.1 / 13.0)) < 1e-15);
    clean += t.tokens == expert_solution_tokens(p);
  }
  // 0.9^7 = 0.478 of 200.
  EXPECT_NEAR(clean, 96, 30);
}

TEST(OffPolicy, SpliceKeepsPrefixAndRescores) {
  const auto pol = make_chain_policy();
  RngStream rng(11);
  const Problem p = make_problem("s", 4, {{Op::Add, 1}, {Op::Add, 1}});
  auto g = testutil::random_group(pol, pol.zero_params(), p, 8, rng, 0.7);
  std::vector<Trajectory> extra(3);
  for (auto& t : extra) {
    t.tokens = expert_solution_tokens(p);
    t.gen_logprobs.assign(t.tokens.size(), -0.01);
  }
  const auto mixed = splice_group(g, extra, Provenance::ExternalExpert, RewardConfig{});
  ASSERT_EQ(mixed.size(), 8u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(mixed.trajectories[i].tokens, g.trajectories[i].tokens);
    EXPECT_EQ(mixed.provenance[i], Provenance::OnPolicy);
  }
  for (std::size_t i = 5; i < 8; ++i) {
    EXPECT_EQ(mixed.provenance[i], Provenance::ExternalExpert);
    EXPECT_EQ(mixed.rewards[i], 3.0);
  }
  EXPECT_EQ(mixed.advantages, compute_advantages(mixed.rewards));
}

TEST(SgdStep, Examples) {
  PolicyParams p;
  p.theta = {1.0};
  p.features = 1;
  EXPECT_DOUBLE_EQ(sgd_step(p, std::vector<double>{2.0}, 0.1).theta[0], 1.2);
  EXPECT_EQ(sgd_step(p, std::vector<double>{0.0}, 0.1).theta, p.theta);
  EXPECT_EQ(sgd_step(p, std::vector<double>{5.0}, 0.0).theta, p.theta);
  EXPECT_THROW(sgd_step(p, std::vector<double>{NAN}, 0.1), NumericError);
  EXPECT_THROW(sgd_step(p, std::vector<double>{1.0, 2.0}, 0.1), ValidationError);
}

TEST(GrpoConfig, Validation) {
  GrpoConfig c;
  EXPECT_NO_THROW(validate(c));
  c.group_size = 1;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.clip_eps = 0.0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.inner_iters = 0;
  EXPECT_THROW(validate(c), ValidationError);
  c = {};
  c.temperature = 0.0;
  EXPECT_THROW(validate(c), ValidationError);
}
