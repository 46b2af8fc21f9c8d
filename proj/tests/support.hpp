#pragma once

// Shared fixtures: a small dense feature map for finite-difference checks,
// random group builders, and brute-force oracles.

#include <algorithm>
#include <numeric>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcrl/egsr.hpp"
#include "gcrl/grpo.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl::testutil {

// Dense features in [-1, 1], a hash of (context, guidance, prefix). Small
// enough that V x F stays under 200 parameters.
class RandomDenseFeatures {
 public:
  explicit RandomDenseFeatures(std::size_t dim = 12, std::uint64_t salt = 0) : dim_(dim), salt_(salt) {}

  std::size_t dimension() const { return dim_; }
  std::uint64_t layout_hash() const { return fnv1a64("random-dense") ^ (dim_ * 0x9e37ULL) ^ salt_; }

  void compute(const Context& ctx, std::span<const Token> prefix, FeatureVector& out) const {
    std::uint64_t h = mix_key(splitmix64(salt_), stream_key(ctx.problem_id));
    h = mix_key(h, static_cast<std::uint64_t>(ctx.initial_value));
    for (Token t : prefix) h = mix_key(h, token_index(t) + 1);
    h = mix_key(h, prefix.size());
    std::uint64_t g = mix_key(h, 0x67ULL + static_cast<std::uint64_t>(ctx.guidance.mode));
    if (ctx.guidance.answer) g = mix_key(g, static_cast<std::uint64_t>(*ctx.guidance.answer));
    if (ctx.guidance.step_hints && prefix.size() < ctx.guidance.step_hints->size())
      g = mix_key(g, static_cast<std::uint64_t>((*ctx.guidance.step_hints)[prefix.size()]) + 100);
    // First half sees only the plain context; the rest also sees guidance.
    for (std::size_t j = 0; j < dim_; ++j) {
      const std::uint64_t src = j < dim_ / 2 ? h : g;
      const double u = static_cast<double>(mix_key(src, j) >> 11) * 0x1.0p-53;
      out.push_back({static_cast<std::uint32_t>(j), 2.0 * u - 1.0});
    }
  }

 private:
  std::size_t dim_;
  std::uint64_t salt_;
};

using DensePolicy = LinearSoftmaxPolicy<RandomDenseFeatures>;

inline double normal(RngStream& rng) {
  const double u1 = std::max(rng.uniform(), 1e-300), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <class Policy>
PolicyParams random_params(const Policy& policy, RngStream& rng, double scale) {
  PolicyParams p = policy.zero_params();
  for (auto& x : p.theta) x = scale * normal(rng);
  return p;
}

inline Problem random_problem(RngStream& rng, int n_min = 2, int n_max = 5, const std::string& id = "") {
  const int n = n_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_max - n_min + 1)));
  std::vector<OpStep> ops(static_cast<std::size_t>(n));
  for (auto& s : ops) s = {static_cast<Op>(rng.below(3)), static_cast<int>(rng.below(10))};
  const std::string name = id.empty() ? "r" + std::to_string(rng.below(1000000)) : id;
  return make_problem(name, static_cast<int>(rng.below(10)), std::move(ops));
}

// G on-policy samples from `old` with arbitrary (random) rewards and the
// matching normalized advantages.
template <class Policy>
RolloutGroup random_group(const Policy& policy, const PolicyParams& old, const Problem& p, int g, RngStream& rng,
                          double temperature) {
  RolloutGroup group;
  group.problem = p;
  const Context ctx = encode_context(p);
  for (int i = 0; i < g; ++i) {
    group.trajectories.push_back(policy.sample_trajectory(old, ctx, temperature, rng));
    group.provenance.push_back(Provenance::OnPolicy);
    group.rewards.push_back(static_cast<double>(rng.below(4)));
  }
  group.advantages = compute_advantages(group.rewards);
  return group;
}

// Largest elementwise |fd - analytic| / max(|fd|, |analytic|, floor) over all
// parameters, with central differences of `objective(params)`.
template <class Fn>
double max_fd_rel_error(PolicyParams params, const std::vector<double>& grad, Fn&& objective, double h = 1e-5,
                        double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.theta.size(); ++i) {
    const double x = params.theta[i];
    params.theta[i] = x + h;
    const double up = objective(params);
    params.theta[i] = x - h;
    const double dn = objective(params);
    params.theta[i] = x;
    const double fd = (up - dn) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), floor}));
  }
  return worst;
}

struct FdInstance {
  PolicyParams params;
  PolicyParams ref;
  RolloutGroup group;
  GrpoConfig cfg;
};

// A random objective instance: rollouts from a perturbed old policy, random
// non-degenerate rewards, optional KL, and with `guided` a tail of M guided
// samples. Rejects instances with any ratio within 1e-3 of a clip kink.
inline FdInstance make_fd_instance(const DensePolicy& policy, RngStream& rng, bool guided) {
  for (;;) {
    FdInstance in;
    in.cfg.group_size = 4 + static_cast<int>(rng.below(5));
    in.cfg.clip_eps = 0.2;
    in.cfg.kl_beta = rng.below(2) ? 0.0 : 0.05 + 0.5 * rng.uniform();
    in.cfg.temperature = 0.5 + 0.7 * rng.uniform();
    const PolicyParams old = random_params(policy, rng, 0.7);
    in.params = old;
    for (auto& x : in.params.theta) x += 0.15 * normal(rng);
    in.ref = random_params(policy, rng, 0.7);
    const Problem p = random_problem(rng, 2, 4);
    RolloutGroup g = random_group(policy, old, p, in.cfg.group_size, rng, in.cfg.temperature);
    if (guided) {
      const auto m = 1 + rng.below(static_cast<std::uint64_t>(in.cfg.group_size - 1));
      const auto mode = rng.below(2) ? GuidanceMode::SolutionAndAnswer : GuidanceMode::AnswerOnly;
      auto extra = guided_rollouts(policy, old, p, make_guidance(p, mode), static_cast<int>(m), in.cfg.temperature, rng);
      const std::size_t keep = g.size() - extra.size();
      g.trajectories.resize(keep);
      g.provenance.resize(keep);
      for (auto& t : extra) {
        g.trajectories.push_back(std::move(t));
        g.provenance.push_back(Provenance::Guided);
      }
    }
    do {
      for (auto& r : g.rewards) r = static_cast<double>(rng.below(4));
    } while (std::all_of(g.rewards.begin(), g.rewards.end(), [&](double r) { return r == g.rewards[0]; }));
    g.advantages = compute_advantages(g.rewards);
    in.group = std::move(g);

    const Context plain = encode_context(p);
    bool near_kink = false;
    for (const auto& t : in.group.trajectories)
      for (double r : token_ratios(policy, in.params, plain, t, in.cfg.temperature))
        near_kink |= std::abs(r - (1.0 - in.cfg.clip_eps)) <= 1e-3 || std::abs(r - (1.0 + in.cfg.clip_eps)) <= 1e-3;
    if (!near_kink) return in;
  }
}

// Brute-force O(n^2) discordant pair count.
template <class Id>
std::uint64_t brute_discordant(const std::vector<Id>& a, const std::vector<Id>& b) {
  std::uint64_t d = 0;
  auto pos = [](const std::vector<Id>& v, const Id& x) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] == x) return i;
    return v.size();
  };
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if (pos(b, a[i]) > pos(b, a[j])) ++d;
  return d;
}

// Success probability of the uniform policy: the first n-3 tokens avoid ANS
// and END (12 of 14 tokens), then ANS, the right digit, END; n <= max_len.
inline double uniform_success_probability(std::size_t max_len) {
  const double v = static_cast<double>(kVocabSize);
  double p = 0.0, free = 1.0;
  for (std::size_t n = 3; n <= max_len; ++n) {
    p += free / (v * v * v);
    free *= (v - 2.0) / v;
  }
  return p;
}

// Same quantity by walking every sequence the uniform sampler can emit.
inline double enumerate_uniform_success(std::size_t max_len, int answer) {
  double total = 0.0;
  TokenSeq seq;
  auto rec = [&](auto&& self, double prob) -> void {
    if (!seq.empty() && seq.back() == Token::End) {
      if (check_format(seq) && digit_value(seq[seq.size() - 2]) == answer) total += prob;
      return;
    }
    if (seq.size() == max_len) return;
    for (std::size_t v = 0; v < kVocabSize; ++v) {
      seq.push_back(static_cast<Token>(v));
      self(self, prob / static_cast<double>(kVocabSize));
      seq.pop_back();
    }
  };
  rec(rec, 1.0);
  return total;
}

// log P(X = k) for X ~ Binomial(n, p).
inline double binom_log_pmf(int k, int n, double p) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
         (n - k) * std::log1p(-p);
}

// Exact two-sided 3-sigma acceptance region of Binomial(n, p): counts k with
// both tail probabilities above the one-sided normal 3-sigma mass.
inline std::pair<int, int> binomial_3sigma_interval(int n, double p) {
  constexpr double kTail = 0.0013498980316301;
  std::vector<double> pmf(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) pmf[static_cast<std::size_t>(k)] = std::exp(binom_log_pmf(k, n, p));
  int lo = 0, hi = n;
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    cdf += pmf[static_cast<std::size_t>(k)];
    if (cdf > kTail) {
      lo = k;
      break;
    }
  }
  double sf = 0.0;
  for (int k = n; k >= 0; --k) {
    sf += pmf[static_cast<std::size_t>(k)];
    if (sf > kTail) {
      hi = k;
      break;
    }
  }
  return {lo, hi};
}

}  // namespace gcrl::testutil
