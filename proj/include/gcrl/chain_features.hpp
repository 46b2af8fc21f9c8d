#pragma once

// Reference feature map for the chain task, and the constructed base policy
// that stands in for a pretrained model.
//
// Layout "chain-features/v1" (F = 403), in block order:
//   bias                    1    always on
//   last token             15    one-hot over V tokens + BOS
//   second-to-last token   15    one-hot over V tokens + BOS
//   decode step            16    prefix length, capped at 15
//   phase                   6    chain step add|sub|mul, chain done,
//                                 answer slot (last token ANS), post answer
//   operand                10    current chain step operand
//   transition            300    (last value, op, operand) of the current step
//   answer copy            10    last value, in the answer slot
//   guide answer @slot     10    guidance answer, in the answer slot
//   guide answer elsewhere 10    guidance answer, every other phase
//   guide step hint        10    expert value of the current step (s,a only)
//
// "Current step" is the number of digits emitted before any ANS, so the
// policy's terse format (v1 v2 .. vn ANS a END) and the expert dialect with
// STEP markers address the same chain step. "Last value" is the most recent
// digit before ANS, or the initial value when none was emitted.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gcrl/policy.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class Phase : std::uint8_t { ChainAdd = 0, ChainSub, ChainMul, ChainDone, AnswerSlot, PostAnswer };

struct DecodeState {
  Phase phase = Phase::ChainDone;
  std::size_t chain_step = 0;
  int last_value = 0;
};

inline DecodeState decode_state(const Context& ctx, std::span<const Token> prefix) {
  DecodeState st;
  st.last_value = ctx.initial_value;
  bool answered = false;
  for (Token t : prefix) {
    if (t == Token::Ans) {
      answered = true;
      break;
    }
    if (is_digit(t)) {
      st.last_value = digit_value(t);
      ++st.chain_step;
    }
  }
  if (answered) {
    st.phase = prefix.back() == Token::Ans ? Phase::AnswerSlot : Phase::PostAnswer;
  } else if (st.chain_step < ctx.ops.size()) {
    st.phase = static_cast<Phase>(ctx.ops[st.chain_step].op);
  } else {
    st.phase = Phase::ChainDone;
  }
  return st;
}

inline bool is_chain_phase(Phase p) { return p == Phase::ChainAdd || p == Phase::ChainSub || p == Phase::ChainMul; }

class ChainFeatures {
 public:
  static constexpr std::size_t kBias = 0;
  static constexpr std::size_t kLastToken = kBias + 1;
  static constexpr std::size_t kPrevToken = kLastToken + kVocabSize + 1;
  static constexpr std::size_t kStepIndex = kPrevToken + kVocabSize + 1;
  static constexpr std::size_t kStepCap = 16;
  static constexpr std::size_t kPhase = kStepIndex + kStepCap;
  static constexpr std::size_t kOperand = kPhase + 6;
  static constexpr std::size_t kTransition = kOperand + 10;
  static constexpr std::size_t kAnswerCopy = kTransition + 10 * kNumOps * 10;
  static constexpr std::size_t kGuideAnswerSlot = kAnswerCopy + 10;
  static constexpr std::size_t kGuideAnswerElsewhere = kGuideAnswerSlot + 10;
  static constexpr std::size_t kGuideHint = kGuideAnswerElsewhere + 10;
  static constexpr std::size_t kDimension = kGuideHint + 10;

  static constexpr std::string_view kLayoutName = "chain-features/v1";

  std::size_t dimension() const { return kDimension; }
  std::uint64_t layout_hash() const { return fnv1a64(kLayoutName) ^ kDimension; }

  static constexpr std::size_t transition_index(int last_value, Op op, int operand) {
    return kTransition + (static_cast<std::size_t>(last_value) * kNumOps + static_cast<std::size_t>(op)) * 10 +
           static_cast<std::size_t>(operand);
  }

  static constexpr bool is_guidance_feature(std::size_t j) { return j >= kGuideAnswerSlot && j < kDimension; }

  void compute(const Context& ctx, std::span<const Token> prefix, FeatureVector& out) const {
    auto on = [&out](std::size_t j) { out.push_back({static_cast<std::uint32_t>(j), 1.0}); };
    const std::size_t bos = kVocabSize;
    const std::size_t n = prefix.size();
    on(kBias);
    on(kLastToken + (n >= 1 ? token_index(prefix[n - 1]) : bos));
    on(kPrevToken + (n >= 2 ? token_index(prefix[n - 2]) : bos));
    on(kStepIndex + std::min(n, kStepCap - 1));

    const DecodeState st = decode_state(ctx, prefix);
    on(kPhase + static_cast<std::size_t>(st.phase));
    if (is_chain_phase(st.phase)) {
      const OpStep& step = ctx.ops[st.chain_step];
      on(kOperand + static_cast<std::size_t>(step.operand));
      on(transition_index(st.last_value, step.op, step.operand));
    }
    if (st.phase == Phase::AnswerSlot) on(kAnswerCopy + static_cast<std::size_t>(st.last_value));

    const Guidance& g = ctx.guidance;
    if (g.mode == GuidanceMode::None) return;
    const auto answer = static_cast<std::size_t>(*g.answer);
    on((st.phase == Phase::AnswerSlot ? kGuideAnswerSlot : kGuideAnswerElsewhere) + answer);
    if (g.mode == GuidanceMode::SolutionAndAnswer && is_chain_phase(st.phase) && st.chain_step < g.step_hints->size())
      on(kGuideHint + static_cast<std::size_t>((*g.step_hints)[st.chain_step]));
  }
};

// ---------------------------------------------------------------------------
// Base policy: a constructed starting point with format skills, guidance
// following, and seeded partial knowledge of the transition table. Each
// (last value, op, operand) entry is known (strong weight on the right
// digit), weak (small weight on it), or misconceived (strong weight on a
// specific wrong digit).

enum class Knowledge : std::uint8_t { Known = 0, Weak = 1, Misconceived = 2 };

struct BasePolicySpec {
  double format_strength = 8.0;
  double copy_strength = 8.0;
  double step_penalty = 3.0;
  double known_strength = 7.0;
  double weak_strength = 3.0;
  double misconception_strength = 7.0;
  // Weight left on the right digit at a misconceived entry.
  double misconception_residual = 4.0;
  double hint_strength = 8.0;
  double answer_hint_strength = 8.0;
  double answer_leak_strength = 0.5;
  // Per op (add, sub, mul): probabilities of {known, weak, misconceived}.
  std::array<std::array<double, 3>, kNumOps> knowledge{{{0.8, 0.0, 0.2}, {0.6, 0.0, 0.4}, {0.5, 0.0, 0.5}}};
  std::uint64_t seed = 0;
};

// The wrong digit a misconceived entry prefers.
inline int misconceived_digit(int v, Op op, int k) {
  int w = 0;
  switch (op) {
    case Op::Add: w = (v + k + 1) % kModulus; break;
    case Op::Sub: w = apply_op(k, Op::Sub, v); break;
    case Op::Mul: w = (v + k) % kModulus; break;
  }
  return w == apply_op(v, op, k) ? (w + 5) % kModulus : w;
}

inline Knowledge base_knowledge(const BasePolicySpec& spec, int v, Op op, int k) {
  auto rng = RngStream::derive(spec.seed, 0x6b6e6f77ULL, static_cast<std::uint64_t>(ChainFeatures::transition_index(v, op, k)));
  const auto& probs = spec.knowledge[static_cast<std::size_t>(op)];
  const double u = rng.uniform();
  if (u < probs[0]) return Knowledge::Known;
  if (u < probs[0] + probs[1]) return Knowledge::Weak;
  return Knowledge::Misconceived;
}

template <class Policy>
PolicyParams make_base_policy(const Policy& policy, const BasePolicySpec& spec) {
  using F = ChainFeatures;
  PolicyParams params = policy.zero_params();
  auto w = [&params](Token t, std::size_t j) -> double& { return params.theta[params.index(token_index(t), j)]; };
  const std::array<Token, 4> non_digits{Token::Step, Token::Ans, Token::End, Token::Pad};

  for (std::size_t ph = 0; ph < 3; ++ph)
    for (Token t : non_digits) w(t, F::kPhase + ph) = -spec.format_strength;
  w(Token::Ans, F::kPhase + static_cast<std::size_t>(Phase::ChainDone)) = spec.format_strength;
  for (Token t : non_digits) w(t, F::kPhase + static_cast<std::size_t>(Phase::AnswerSlot)) = -spec.format_strength;
  w(Token::End, F::kPhase + static_cast<std::size_t>(Phase::PostAnswer)) = spec.format_strength;
  w(Token::Step, F::kBias) = -spec.step_penalty;

  for (int d = 0; d < 10; ++d) {
    w(digit_token(d), F::kAnswerCopy + static_cast<std::size_t>(d)) = spec.copy_strength;
    w(digit_token(d), F::kGuideAnswerSlot + static_cast<std::size_t>(d)) = spec.answer_hint_strength;
    w(digit_token(d), F::kGuideAnswerElsewhere + static_cast<std::size_t>(d)) = spec.answer_leak_strength;
    w(digit_token(d), F::kGuideHint + static_cast<std::size_t>(d)) = spec.hint_strength;
  }

  for (int v = 0; v < 10; ++v)
    for (std::size_t o = 0; o < kNumOps; ++o)
      for (int k = 0; k < 10; ++k) {
        const Op op = static_cast<Op>(o);
        const std::size_t j = F::transition_index(v, op, k);
        const int correct = apply_op(v, op, k);
        switch (base_knowledge(spec, v, op, k)) {
          case Knowledge::Known: w(digit_token(correct), j) = spec.known_strength; break;
          case Knowledge::Weak: w(digit_token(correct), j) = spec.weak_strength; break;
          case Knowledge::Misconceived:
            w(digit_token(misconceived_digit(v, op, k)), j) = spec.misconception_strength;
            w(digit_token(correct), j) = spec.misconception_residual;
            break;
        }
      }
  return params;
}

using ChainPolicy = LinearSoftmaxPolicy<ChainFeatures>;

// Longest expert solution (2 * 12 + 3 = 27 tokens) fits with room to spare.
inline constexpr std::size_t kDefaultMaxLen = 32;

inline ChainPolicy make_chain_policy(std::size_t max_len = kDefaultMaxLen) { return ChainPolicy(ChainFeatures{}, max_len); }

}  // namespace gcrl
