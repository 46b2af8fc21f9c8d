#pragma once

// Expert-guided self-reformulation. When a rollout group earns no reward, the
// old policy re-samples M trajectories conditioned on guidance derived from
// the expert solution; those replace the tail of the group. Guided tokens are
// trained through ratios whose numerator is the UNGUIDED current policy and
// whose denominator is the guided old policy that actually generated them.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcrl/errors.hpp"
#include "gcrl/grpo.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class TriggerMode : std::uint8_t { TotalRewardZero = 0, AccuracyZero = 1 };

struct EgsrConfig {
  int guided_count = 4;
  TriggerMode trigger = TriggerMode::TotalRewardZero;
  GuidanceMode guidance_mode = GuidanceMode::SolutionAndAnswer;
};

inline void validate(const EgsrConfig& e, const GrpoConfig& g) {
  if (e.guided_count < 1 || e.guided_count >= g.group_size)
    throw ValidationError("egsr.guided_count must satisfy 1 <= M < G");
  if (e.guidance_mode == GuidanceMode::None) throw ValidationError("egsr.guidance_mode must not be none");
}

inline bool should_trigger(const RolloutGroup& group, const EgsrConfig& cfg) {
  if (group.rewards.size() != group.trajectories.size()) throw ValidationError("should_trigger: rewards not populated");
  if (cfg.trigger == TriggerMode::TotalRewardZero)
    return std::all_of(group.rewards.begin(), group.rewards.end(), [](double r) { return r == 0.0; });
  return std::all_of(group.trajectories.begin(), group.trajectories.end(), [](const Trajectory& t) {
    if (!t.reward) throw ValidationError("should_trigger: trajectory reward breakdown missing");
    return t.reward->accuracy == 0;
  });
}

inline Guidance make_guidance(const Problem& p, GuidanceMode mode) {
  Guidance g;
  g.mode = mode;
  if (mode == GuidanceMode::None) return g;
  g.answer = p.answer;
  if (mode == GuidanceMode::SolutionAndAnswer) g.step_hints = p.expert_steps;
  return g;
}

// M samples from the old policy under the guided context. Their gen_logprobs
// are the guided-context probabilities that sampled them.
template <class Policy>
std::vector<Trajectory> guided_rollouts(const Policy& policy, const PolicyParams& params_old, const Problem& p,
                                        const Guidance& guidance, int m, double temperature, RngStream& rng) {
  if (m < 1) throw ValidationError("guided_rollouts: M must be >= 1");
  const Context ctx = encode_context(p, guidance);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) out.push_back(policy.sample_trajectory(params_old, ctx, temperature, rng));
  return out;
}

inline RolloutGroup assemble_mixed(const RolloutGroup& group, std::vector<Trajectory> guided, const EgsrConfig& cfg,
                                   const RewardConfig& reward_cfg) {
  if (guided.size() != static_cast<std::size_t>(cfg.guided_count))
    throw ValidationError("assemble_mixed: expected " + std::to_string(cfg.guided_count) + " guided trajectories, got " +
                          std::to_string(guided.size()));
  return splice_group(group, std::move(guided), Provenance::Guided, reward_cfg);
}

// (1/(G-M)) sum_on (1/|tau|) sum_t [clip(r) term] + (1/M) sum_guided (1/|tau'|)
// sum_t [clip(r') term], minus beta * k3 on every token. Both r and r' score
// the numerator under the unguided context; KL uses the unguided context too.
// With no guided members this is exactly the GRPO objective.
template <class Policy>
ObjectiveAndGrad egsr_objective_and_grad(const Policy& policy, const PolicyParams& params, const RolloutGroup& mixed,
                                         const GrpoConfig& grpo_cfg, const PolicyParams* ref_params = nullptr) {
  detail::check_group(mixed);
  std::vector<std::size_t> on, guided;
  for (std::size_t i = 0; i < mixed.size(); ++i)
    (mixed.provenance[i] == Provenance::Guided ? guided : on).push_back(i);
  if (on.empty()) throw ValidationError("egsr objective: no on-policy trajectories in group " + mixed.problem.id);
  ObjectiveAndGrad out;
  out.grad.assign(policy.num_params(), 0.0);
  const Context ctx = encode_context(mixed.problem);
  out.objective = detail::subset_surrogate(policy, params, mixed, ctx, on, 1.0 / static_cast<double>(on.size()),
                                           grpo_cfg, ref_params, out.grad);
  if (!guided.empty())
    out.objective += detail::subset_surrogate(policy, params, mixed, ctx, guided,
                                              1.0 / static_cast<double>(guided.size()), grpo_cfg, ref_params, out.grad);
  return out;
}

}  // namespace gcrl
