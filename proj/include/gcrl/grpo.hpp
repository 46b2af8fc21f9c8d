#pragma once

// Group-relative policy optimization: group-normalized advantages, clipped
// token ratios, k3 KL penalty, the analytic objective gradient, and the naive
// off-policy splice baseline that substitutes external expert demonstrations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcrl/errors.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class Provenance : std::uint8_t { OnPolicy = 0, Guided = 1, ExternalExpert = 2 };

inline std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::OnPolicy: return "on_policy";
    case Provenance::Guided: return "guided";
    case Provenance::ExternalExpert: return "external_expert";
  }
  return "?";
}

struct RolloutGroup {
  Problem problem;
  std::vector<Trajectory> trajectories;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<Provenance> provenance;

  std::size_t size() const { return trajectories.size(); }
};

struct GrpoConfig {
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  int inner_iters = 4;
  double learning_rate = 1e-6;
  double temperature = 0.7;
};

inline void validate(const GrpoConfig& c) {
  if (c.group_size < 2) throw ValidationError("grpo.group_size must be >= 2");
  if (!(c.clip_eps > 0.0)) throw ValidationError("grpo.clip_eps must be > 0");
  if (!(c.kl_beta >= 0.0)) throw ValidationError("grpo.kl_beta must be >= 0");
  if (c.inner_iters < 1) throw ValidationError("grpo.inner_iters must be >= 1");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    throw ValidationError("grpo.learning_rate must be finite and >= 0");
  if (!(c.temperature > 0.0)) throw ValidationError("grpo.temperature must be > 0");
}

// A_i = (R_i - mean) / std with the population std. A zero-variance group
// gets all-zero advantages, so it contributes no gradient.
inline std::vector<double> compute_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ValidationError("compute_advantages needs at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd == 0.0) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

// Rescores every trajectory and fills rewards (advantages untouched).
inline void score_group(RolloutGroup& g, const RewardConfig& cfg) {
  g.rewards.resize(g.trajectories.size());
  for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
    auto r = score(g.problem, g.trajectories[i].tokens, cfg);
    g.trajectories[i].reward = r;
    g.rewards[i] = r.total;
  }
}

inline void fill_advantages(RolloutGroup& g) { g.advantages = compute_advantages(g.rewards); }

inline double clipped_term(double ratio, double advantage, double eps) {
  const double clamped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clamped * advantage);
}

// True when the min in clipped_term picks the unclamped branch, i.e. the
// ratio carries gradient.
inline bool ratio_branch_active(double ratio, double advantage, double eps) {
  const double clamped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return ratio * advantage <= clamped * advantage;
}

// k3 estimator exp(d) - d - 1 with d = log pi_ref - log pi_theta.
inline double k3(double log_ref, double log_theta) {
  const double d = log_ref - log_theta;
  return std::exp(d) - d - 1.0;
}

template <class Policy>
std::vector<double> token_ratios(const Policy& policy, const PolicyParams& params_new, const Context& ctx_score,
                                 const Trajectory& traj, double temperature) {
  if (traj.gen_logprobs.size() != traj.tokens.size())
    throw ValidationError("trajectory gen_logprobs not populated for " + traj.problem_id);
  const auto lp = policy.logprob_under(params_new, ctx_score, traj.tokens, temperature);
  std::vector<double> r(lp.size());
  for (std::size_t t = 0; t < lp.size(); ++t) {
    r[t] = std::exp(lp[t] - traj.gen_logprobs[t]);
    if (!std::isfinite(r[t]) || !(r[t] > 0.0))
      throw NumericError("non-finite or zero ratio at step " + std::to_string(t) + " of " + traj.problem_id);
  }
  return r;
}

template <class Policy>
std::vector<double> offpolicy_ratios(const Policy& policy, const PolicyParams& params_new, const Trajectory& expert_traj,
                                     Provenance provenance, const Context& ctx, double temperature) {
  if (provenance != Provenance::ExternalExpert)
    throw ValidationError("offpolicy_ratios expects an external expert trajectory");
  return token_ratios(policy, params_new, ctx, expert_traj, temperature);
}

template <class Policy>
std::vector<double> kl_term(const Policy& policy, const PolicyParams& params, const PolicyParams& ref_params,
                            const Context& ctx, const Trajectory& traj, double temperature) {
  const auto lp = policy.logprob_under(params, ctx, traj.tokens, temperature);
  const auto lr = policy.logprob_under(ref_params, ctx, traj.tokens, temperature);
  std::vector<double> out(lp.size());
  for (std::size_t t = 0; t < lp.size(); ++t) out[t] = k3(lr[t], lp[t]);
  return out;
}

struct ObjectiveAndGrad {
  double objective = 0.0;
  std::vector<double> grad;
};

namespace detail {

// Sum over tokens of [clip term - beta * k3] for one trajectory, scored under
// ctx_score. Adds scale * d/dtheta of that sum into grad and returns the sum.
template <class Policy>
double trajectory_surrogate(const Policy& policy, const PolicyParams& params, const Context& ctx_score,
                            const Trajectory& traj, double advantage, const GrpoConfig& cfg,
                            const PolicyParams* ref_params, double scale, std::span<double> grad) {
  const double temp = cfg.temperature;
  std::vector<double> ref_lp;
  if (cfg.kl_beta > 0.0 && ref_params) ref_lp = policy.logprob_under(*ref_params, ctx_score, traj.tokens, temp);
  const bool use_kl = !ref_lp.empty();
  double sum = 0.0;
  policy.for_each_step(params, ctx_score, traj.tokens, temp,
                       [&](std::size_t t, const FeatureVector& phi, const Distribution& probs, double lp) {
                         const double ratio = std::exp(lp - traj.gen_logprobs[t]);
                         if (!std::isfinite(ratio) || !(ratio > 0.0))
                           throw NumericError("non-finite or zero ratio at step " + std::to_string(t) + " of " +
                                              traj.problem_id);
                         double term = clipped_term(ratio, advantage, cfg.clip_eps);
                         double coeff = ratio_branch_active(ratio, advantage, cfg.clip_eps) ? advantage * ratio : 0.0;
                         if (use_kl) {
                           const double d = ref_lp[t] - lp;
                           term -= cfg.kl_beta * k3(ref_lp[t], lp);
                           coeff += cfg.kl_beta * (std::exp(d) - 1.0);
                         }
                         sum += term;
                         if (coeff != 0.0)
                           accumulate_token_grad(grad, policy.num_features(), phi, probs, token_index(traj.tokens[t]),
                                                 scale * coeff / temp);
                       });
  return sum;
}

inline void check_group(const RolloutGroup& g) {
  if (g.trajectories.empty()) throw ValidationError("empty rollout group");
  if (g.advantages.size() != g.trajectories.size())
    throw ValidationError("group advantages not populated for " + g.problem.id);
  if (g.provenance.size() != g.trajectories.size())
    throw ValidationError("group provenance size mismatch for " + g.problem.id);
  for (const auto& t : g.trajectories) {
    if (t.tokens.empty()) throw ValidationError("zero-length trajectory in group " + g.problem.id);
    if (t.gen_logprobs.size() != t.tokens.size())
      throw ValidationError("trajectory without gen_logprobs in group " + g.problem.id);
  }
}

// Weighted sum over a subset of the group: weight * sum_i (1/|tau_i|) * S_i.
template <class Policy>
double subset_surrogate(const Policy& policy, const PolicyParams& params, const RolloutGroup& group,
                        const Context& ctx_score, std::span<const std::size_t> members, double weight,
                        const GrpoConfig& cfg, const PolicyParams* ref_params, std::span<double> grad) {
  double total = 0.0;
  for (std::size_t i : members) {
    const auto& traj = group.trajectories[i];
    const double inv_len = 1.0 / static_cast<double>(traj.tokens.size());
    total += inv_len * trajectory_surrogate(policy, params, ctx_score, traj, group.advantages[i], cfg, ref_params,
                                            weight * inv_len, grad);
  }
  return weight * total;
}

}  // namespace detail

// (1/G) sum_i (1/|tau_i|) sum_t [min(r A, clip(r) A) - beta k3], every ratio
// numerator scored under the unguided question context. ref_params may be
// null when kl_beta == 0.
template <class Policy>
ObjectiveAndGrad grpo_objective_and_grad(const Policy& policy, const PolicyParams& params, const RolloutGroup& group,
                                         const GrpoConfig& cfg, const PolicyParams* ref_params = nullptr) {
  detail::check_group(group);
  ObjectiveAndGrad out;
  out.grad.assign(policy.num_params(), 0.0);
  const Context ctx = encode_context(group.problem);
  std::vector<std::size_t> all(group.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const double w = 1.0 / static_cast<double>(group.size());
  out.objective = detail::subset_surrogate(policy, params, group, ctx, all, w, cfg, ref_params, out.grad);
  return out;
}

// theta' = theta + lr * grad (ascent).
inline PolicyParams sgd_step(const PolicyParams& params, std::span<const double> grad, double learning_rate) {
  if (grad.size() != params.theta.size()) throw ValidationError("gradient length does not match parameters");
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("non-finite gradient entry");
  PolicyParams next = params;
  for (std::size_t i = 0; i < grad.size(); ++i) next.theta[i] += learning_rate * grad[i];
  next.version = params.version + 1;
  return next;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// External expert for the off-policy baseline: follows the expert dialect,
// emitting the scripted token with probability `fidelity` and any other
// token uniformly otherwise, so per-token probabilities are known exactly.

class ExpertSampler {
 public:
  explicit ExpertSampler(double fidelity = 0.99) : fidelity_(fidelity) {
    if (!(fidelity > 0.0 && fidelity < 1.0)) throw ValidationError("expert fidelity must lie in (0, 1)");
  }

  double fidelity() const { return fidelity_; }

  Trajectory sample(const Problem& p, RngStream& rng, std::size_t max_len) const {
    const TokenSeq script = expert_solution_tokens(p);
    const double log_hit = std::log(fidelity_);
    const double log_miss = std::log((1.0 - fidelity_) / static_cast<double>(kVocabSize - 1));
    Trajectory traj;
    traj.problem_id = p.id;
    while (traj.tokens.size() < max_len) {
      const std::size_t s = traj.tokens.size();
      const Token intended = s < script.size() ? script[s] : Token::End;
      Token pick = intended;
      double lp = log_hit;
      if (rng.uniform() >= fidelity_) {
        auto other = static_cast<std::size_t>(rng.below(kVocabSize - 1));
        if (other >= token_index(intended)) ++other;
        pick = static_cast<Token>(other);
        lp = log_miss;
      }
      traj.tokens.push_back(pick);
      traj.gen_logprobs.push_back(lp);
      if (pick == Token::End) break;
    }
    return traj;
  }

 private:
  double fidelity_;
};

// Keeps the first G - M trajectories of `group` (by sampling index), appends
// `extra` tagged with `tag`, rescores everything and recomputes pooled
// advantages over the whole mixed set.
inline RolloutGroup splice_group(const RolloutGroup& group, std::vector<Trajectory> extra, Provenance tag,
                                 const RewardConfig& reward_cfg) {
  if (extra.size() >= group.size())
    throw ValidationError("splice: need 1 <= M < G, got M=" + std::to_string(extra.size()) +
                          " G=" + std::to_string(group.size()));
  if (extra.empty()) throw ValidationError("splice: no trajectories to splice in");
  const std::size_t keep = group.size() - extra.size();
  RolloutGroup mixed;
  mixed.problem = group.problem;
  for (std::size_t i = 0; i < keep; ++i) {
    mixed.trajectories.push_back(group.trajectories[i]);
    mixed.provenance.push_back(group.provenance.empty() ? Provenance::OnPolicy : group.provenance[i]);
  }
  for (auto& t : extra) {
    mixed.trajectories.push_back(std::move(t));
    mixed.provenance.push_back(tag);
  }
  score_group(mixed, reward_cfg);
  fill_advantages(mixed);
  return mixed;
}

}  // namespace gcrl
