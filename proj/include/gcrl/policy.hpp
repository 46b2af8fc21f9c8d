#pragma once

// Linear-in-features softmax autoregressive policy.
//
// The policy is parameterized by a V x F matrix theta. At each decode step a
// feature map turns (context, prefix) into a sparse feature vector phi and
//   pi(v | ctx, prefix) = softmax_v( theta_v . phi / T ).
// The feature map is a template parameter; the reference map lives in
// chain_features.hpp, tests plug in small dense random maps.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcrl/errors.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class GuidanceMode : std::uint8_t { None = 0, AnswerOnly = 1, SolutionAndAnswer = 2 };

inline std::string_view guidance_mode_name(GuidanceMode m) {
  switch (m) {
    case GuidanceMode::None: return "none";
    case GuidanceMode::AnswerOnly: return "answer_only";
    case GuidanceMode::SolutionAndAnswer: return "solution_and_answer";
  }
  return "?";
}

struct Guidance {
  GuidanceMode mode = GuidanceMode::None;
  std::optional<int> answer;
  std::optional<std::vector<int>> step_hints;
  friend bool operator==(const Guidance&, const Guidance&) = default;
};

inline void validate(const Guidance& g) {
  if (g.answer.has_value() != (g.mode != GuidanceMode::None))
    throw ValidationError("guidance: answer must be present iff mode != none");
  if (g.step_hints.has_value() != (g.mode == GuidanceMode::SolutionAndAnswer))
    throw ValidationError("guidance: step_hints must be present iff mode == solution_and_answer");
  if (g.answer && (*g.answer < 0 || *g.answer >= kModulus)) throw ValidationError("guidance: answer not a digit");
}

// Longest chain the dense problem encoding has slots for.
inline constexpr std::size_t kMaxChain = 12;

// Conditioning for one problem: the question (initial value and op chain) and
// optional guidance. Feature maps read from it; the dense encodings below are
// the documented problem/guidance blocks.
struct Context {
  std::string problem_id;
  int initial_value = 0;
  std::vector<OpStep> ops;
  Guidance guidance;

  // initial value one-hot (10), then per chain slot: op one-hot (add, sub,
  // mul, empty) and operand one-hot (10).
  std::vector<double> problem_encoding() const {
    std::vector<double> e(10 + kMaxChain * 14, 0.0);
    e[static_cast<std::size_t>(initial_value)] = 1.0;
    for (std::size_t i = 0; i < kMaxChain; ++i) {
      const std::size_t base = 10 + i * 14;
      if (i < ops.size()) {
        e[base + static_cast<std::size_t>(ops[i].op)] = 1.0;
        e[base + 4 + static_cast<std::size_t>(ops[i].operand)] = 1.0;
      } else {
        e[base + 3] = 1.0;
      }
    }
    return e;
  }

  // answer one-hot (10), then one hint one-hot (10) per chain slot.
  std::vector<double> guidance_encoding() const {
    std::vector<double> e(10 + kMaxChain * 10, 0.0);
    if (guidance.answer) e[static_cast<std::size_t>(*guidance.answer)] = 1.0;
    if (guidance.step_hints)
      for (std::size_t i = 0; i < guidance.step_hints->size() && i < kMaxChain; ++i)
        e[10 + i * 10 + static_cast<std::size_t>((*guidance.step_hints)[i])] = 1.0;
    return e;
  }
};

inline Context encode_context(const Problem& p, const Guidance& g = {}) {
  validate(g);
  if (g.answer && *g.answer != p.answer)
    throw ValidationError("guidance answer " + std::to_string(*g.answer) + " does not match problem " + p.id);
  if (g.step_hints && *g.step_hints != p.expert_steps)
    throw ValidationError("guidance step hints do not match expert steps of problem " + p.id);
  if (p.ops.size() > kMaxChain) throw ValidationError("problem " + p.id + " exceeds the maximum chain length");
  return Context{p.id, p.initial_value, p.ops, g};
}

struct PolicyParams {
  std::vector<double> theta;
  std::size_t vocab = kVocabSize;
  std::size_t features = 0;
  std::uint64_t layout_hash = 0;
  std::int64_t version = 0;

  std::size_t index(std::size_t token, std::size_t feature) const { return token * features + feature; }
  double at(Token t, std::size_t feature) const { return theta[index(token_index(t), feature)]; }
  std::size_t size() const { return theta.size(); }
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

inline void validate(const PolicyParams& p) {
  if (p.vocab != kVocabSize) throw ValidationError("policy params: vocab size must be 14");
  if (p.theta.size() != p.vocab * p.features) throw ValidationError("policy params: length != V * F");
  for (double x : p.theta)
    if (!std::isfinite(x)) throw NumericError("policy params contain a non-finite entry");
}

struct FeatureEntry {
  std::uint32_t index;
  double value;
};
using FeatureVector = std::vector<FeatureEntry>;

template <class F>
concept FeatureMap = requires(const F& f, const Context& ctx, std::span<const Token> prefix, FeatureVector& out) {
  { f.dimension() } -> std::convertible_to<std::size_t>;
  { f.layout_hash() } -> std::convertible_to<std::uint64_t>;
  f.compute(ctx, prefix, out);
};

struct Trajectory {
  std::string problem_id;
  TokenSeq tokens;
  std::vector<double> gen_logprobs;
  GuidanceMode guidance_mode = GuidanceMode::None;
  std::optional<RewardBreakdown> reward;

  std::size_t size() const { return tokens.size(); }
};

using Distribution = std::array<double, kVocabSize>;

// Adds scale * (onehot(target) - probs) (x) phi into grad: the gradient of
// scale * T * log pi(target) for the linear softmax head.
inline void accumulate_token_grad(std::span<double> grad, std::size_t num_features, const FeatureVector& phi,
                                  const Distribution& probs, std::size_t target, double scale) {
  for (std::size_t v = 0; v < kVocabSize; ++v) {
    const double c = scale * ((v == target ? 1.0 : 0.0) - probs[v]);
    if (c == 0.0) continue;
    double* row = grad.data() + v * num_features;
    for (const auto& f : phi) row[f.index] += c * f.value;
  }
}

template <FeatureMap Features>
class LinearSoftmaxPolicy {
 public:
  explicit LinearSoftmaxPolicy(Features features, std::size_t max_len = 32)
      : features_(std::move(features)), max_len_(max_len) {}

  const Features& features() const { return features_; }
  std::size_t num_features() const { return features_.dimension(); }
  std::size_t num_params() const { return kVocabSize * num_features(); }
  std::size_t max_len() const { return max_len_; }

  PolicyParams zero_params() const {
    return PolicyParams{std::vector<double>(num_params(), 0.0), kVocabSize, num_features(), features_.layout_hash(), 0};
  }

  void check_compatible(const PolicyParams& params) const {
    if (params.features != num_features() || params.theta.size() != num_params() ||
        params.layout_hash != features_.layout_hash())
      throw ValidationError("policy params do not match the feature layout");
  }

  // Feature vector and log-softmax at one decode step. Returns log-probs.
  Distribution step_log_distribution(const PolicyParams& params, const Context& ctx, std::span<const Token> prefix,
                                     double temperature, FeatureVector& phi) const {
    if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
    phi.clear();
    features_.compute(ctx, prefix, phi);
    const std::size_t nf = num_features();
    Distribution logits{};
    for (std::size_t v = 0; v < kVocabSize; ++v) {
      const double* row = params.theta.data() + v * nf;
      double s = 0.0;
      for (const auto& f : phi) s += row[f.index] * f.value;
      logits[v] = s / temperature;
      if (!std::isfinite(logits[v]))
        throw NumericError("non-finite logit for token " + token_name(static_cast<Token>(v)));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double log_z = mx + std::log(z);
    for (auto& l : logits) l -= log_z;
    return logits;
  }

  static Distribution probabilities(const Distribution& log_probs) {
    Distribution p{};
    double s = 0.0;
    for (std::size_t v = 0; v < kVocabSize; ++v) s += (p[v] = std::exp(log_probs[v]));
    for (auto& x : p) x /= s;
    return p;
  }

  Distribution token_distribution(const PolicyParams& params, const Context& ctx, std::span<const Token> prefix,
                                  double temperature) const {
    if (prefix.size() >= max_len_) throw ValidationError("prefix length must be below max_len");
    FeatureVector phi;
    return probabilities(step_log_distribution(params, ctx, prefix, temperature, phi));
  }

  // Samples until END or max_len tokens. gen_logprobs are taken from the exact
  // sampling distribution, temperature included.
  Trajectory sample_trajectory(const PolicyParams& params, const Context& ctx, double temperature, RngStream& rng,
                               std::optional<std::size_t> max_len = std::nullopt) const {
    const std::size_t limit = std::min(max_len.value_or(max_len_), max_len_);
    Trajectory traj;
    traj.problem_id = ctx.problem_id;
    traj.guidance_mode = ctx.guidance.mode;
    FeatureVector phi;
    while (traj.tokens.size() < limit) {
      const auto logp = step_log_distribution(params, ctx, traj.tokens, temperature, phi);
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t pick = kVocabSize;
      std::size_t last_nonzero = 0;
      for (std::size_t v = 0; v < kVocabSize; ++v) {
        const double p = std::exp(logp[v]);
        if (p > 0.0) last_nonzero = v;
        acc += p;
        if (pick == kVocabSize && u < acc) pick = v;
      }
      // acc can round to just under 1.
      if (pick == kVocabSize) pick = last_nonzero;
      traj.tokens.push_back(static_cast<Token>(pick));
      traj.gen_logprobs.push_back(logp[pick]);
      if (pick == token_index(Token::End)) break;
    }
    return traj;
  }

  std::vector<double> logprob_under(const PolicyParams& params, const Context& ctx, std::span<const Token> t,
                                    double temperature) const {
    check_length(t);
    std::vector<double> out;
    out.reserve(t.size());
    FeatureVector phi;
    for (std::size_t s = 0; s < t.size(); ++s) {
      const auto logp = step_log_distribution(params, ctx, t.first(s), temperature, phi);
      out.push_back(logp[token_index(t[s])]);
    }
    return out;
  }

  // Gradient of sum_t log pi(t_s | ctx, t_<s) with respect to theta.
  std::vector<double> grad_logprob(const PolicyParams& params, const Context& ctx, std::span<const Token> t,
                                   double temperature) const {
    check_length(t);
    std::vector<double> grad(num_params(), 0.0);
    FeatureVector phi;
    for (std::size_t s = 0; s < t.size(); ++s) {
      const auto probs = probabilities(step_log_distribution(params, ctx, t.first(s), temperature, phi));
      accumulate_token_grad(grad, num_features(), phi, probs, token_index(t[s]), 1.0 / temperature);
    }
    return grad;
  }

  // Visits every decode step of t with its features, probabilities and the
  // log-probability of the realized token.
  template <class Fn>
  void for_each_step(const PolicyParams& params, const Context& ctx, std::span<const Token> t, double temperature,
                     Fn&& fn) const {
    check_length(t);
    FeatureVector phi;
    for (std::size_t s = 0; s < t.size(); ++s) {
      const auto logp = step_log_distribution(params, ctx, t.first(s), temperature, phi);
      fn(s, static_cast<const FeatureVector&>(phi), probabilities(logp), logp[token_index(t[s])]);
    }
  }

  // exp(-mean log-prob) at temperature 1.
  double perplexity(const PolicyParams& params, const Context& ctx, std::span<const Token> t) const {
    if (t.empty()) throw ValidationError("perplexity of an empty sequence is undefined");
    const auto lp = logprob_under(params, ctx, t, 1.0);
    double s = 0.0;
    for (double x : lp) s += x;
    return std::exp(-s / static_cast<double>(lp.size()));
  }

 private:
  void check_length(std::span<const Token> t) const {
    if (t.size() > max_len_) throw ValidationError("token sequence longer than max_len");
    for (Token tok : t)
      if (token_index(tok) >= kVocabSize) throw ValidationError("token outside the vocabulary");
  }

  Features features_;
  std::size_t max_len_;
};

}  // namespace gcrl
