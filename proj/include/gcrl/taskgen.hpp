#pragma once

// Synthetic modular-arithmetic chain problems with an expert oracle.
//
// A problem starts at a digit v0 and applies a chain of (operator, operand)
// steps modulo 10. The expert solution lists every intermediate value in a
// verbose dialect: STEP v1 STEP v2 ... STEP vn ANS a END.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcrl/errors.hpp"
#include "gcrl/rng.hpp"

namespace gcrl {

inline constexpr int kModulus = 10;

enum class Token : std::uint8_t {
  D0 = 0, D1, D2, D3, D4, D5, D6, D7, D8, D9,
  Step = 10,
  Ans = 11,
  End = 12,
  // Filler symbol. Never produced by the expert or required by the format.
  Pad = 13,
};

inline constexpr std::size_t kVocabSize = 14;

using TokenSeq = std::vector<Token>;

inline constexpr bool is_digit(Token t) { return static_cast<std::uint8_t>(t) < 10; }
inline constexpr int digit_value(Token t) { return static_cast<int>(t); }
inline constexpr Token digit_token(int d) { return static_cast<Token>(d); }
inline constexpr std::size_t token_index(Token t) { return static_cast<std::size_t>(t); }

inline std::string token_name(Token t) {
  switch (t) {
    case Token::Step: return "STEP";
    case Token::Ans: return "ANS";
    case Token::End: return "END";
    case Token::Pad: return "PAD";
    default: return "D" + std::to_string(digit_value(t));
  }
}

inline std::string to_string(std::span<const Token> seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += token_name(seq[i]);
  }
  return out;
}

enum class Op : std::uint8_t { Add = 0, Sub = 1, Mul = 2 };
inline constexpr std::size_t kNumOps = 3;

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
  }
  return "?";
}

inline Op parse_op(std::string_view s) {
  if (s == "add") return Op::Add;
  if (s == "sub") return Op::Sub;
  if (s == "mul") return Op::Mul;
  throw ValidationError("unknown operator '" + std::string(s) + "'");
}

// (v op k) mod 10, always in [0, 9]; sub wraps rather than going negative.
inline constexpr int apply_op(int v, Op op, int k) {
  switch (op) {
    case Op::Add: return (v + k) % kModulus;
    case Op::Sub: return ((v - k) % kModulus + kModulus) % kModulus;
    case Op::Mul: return (v * k) % kModulus;
  }
  return 0;
}

struct OpStep {
  Op op = Op::Add;
  int operand = 0;
  friend bool operator==(const OpStep&, const OpStep&) = default;
};

struct TaskSpec {
  int modulus = kModulus;
  int n_min = 2;
  int n_max = 8;
  std::vector<Op> op_set{Op::Add, Op::Sub, Op::Mul};
  int count = 400;
  std::uint64_t seed = 0;
  // Prefix for generated ids; lets several datasets coexist in one run.
  std::string id_prefix = "p";
};

inline void validate(const TaskSpec& spec) {
  if (spec.modulus != kModulus)
    throw ValidationError("TaskSpec.modulus must be 10, got " + std::to_string(spec.modulus));
  if (spec.n_min < 2) throw ValidationError("TaskSpec.n_min must be >= 2, got " + std::to_string(spec.n_min));
  if (spec.n_max > 12) throw ValidationError("TaskSpec.n_max must be <= 12, got " + std::to_string(spec.n_max));
  if (spec.n_min > spec.n_max)
    throw ValidationError("TaskSpec.n_min (" + std::to_string(spec.n_min) + ") exceeds n_max (" +
                          std::to_string(spec.n_max) + ")");
  if (spec.op_set.empty()) throw ValidationError("TaskSpec.op_set must be non-empty");
  if (spec.count < 1) throw ValidationError("TaskSpec.count must be >= 1, got " + std::to_string(spec.count));
}

struct Problem {
  std::string id;
  int initial_value = 0;
  std::vector<OpStep> ops;
  std::vector<int> expert_steps;
  int answer = 0;
  std::optional<int> predefined_rank;

  std::size_t chain_length() const { return ops.size(); }
  bool has_expert_solution() const { return !expert_steps.empty() && expert_steps.size() == ops.size(); }
  friend bool operator==(const Problem&, const Problem&) = default;
};

inline std::vector<int> evaluate_chain(int initial_value, std::span<const OpStep> ops) {
  std::vector<int> values;
  values.reserve(ops.size());
  int v = initial_value;
  for (const auto& s : ops) {
    v = apply_op(v, s.op, s.operand);
    values.push_back(v);
  }
  return values;
}

inline Problem make_problem(std::string id, int initial_value, std::vector<OpStep> ops) {
  Problem p;
  p.id = std::move(id);
  p.initial_value = initial_value;
  p.expert_steps = evaluate_chain(initial_value, ops);
  p.answer = p.expert_steps.empty() ? initial_value : p.expert_steps.back();
  p.ops = std::move(ops);
  return p;
}

// Chain consistency, value ranges, and answer agreement.
inline void validate(const Problem& p) {
  auto in_range = [](int v) { return v >= 0 && v < kModulus; };
  if (!in_range(p.initial_value)) throw ValidationError("problem " + p.id + ": initial_value out of range");
  if (p.ops.empty()) throw ValidationError("problem " + p.id + ": empty op chain");
  for (const auto& s : p.ops)
    if (!in_range(s.operand)) throw ValidationError("problem " + p.id + ": operand out of range");
  if (p.expert_steps != evaluate_chain(p.initial_value, p.ops))
    throw ValidationError("problem " + p.id + ": expert_steps disagree with the op chain");
  if (p.answer != p.expert_steps.back()) throw ValidationError("problem " + p.id + ": answer disagrees with chain");
}

inline std::vector<Problem> build_dataset(const TaskSpec& spec) {
  validate(spec);
  std::vector<Problem> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  const auto span = static_cast<std::uint64_t>(spec.n_max - spec.n_min + 1);
  const int width = std::max<int>(5, static_cast<int>(std::to_string(spec.count - 1).size()));
  for (int i = 0; i < spec.count; ++i) {
    auto rng = RngStream::derive(spec.seed, 0x7461736bULL, static_cast<std::uint64_t>(i));
    const int n = spec.n_min + static_cast<int>(rng.below(span));
    const int v0 = static_cast<int>(rng.below(kModulus));
    std::vector<OpStep> ops(static_cast<std::size_t>(n));
    for (auto& s : ops) {
      s.op = spec.op_set[rng.below(spec.op_set.size())];
      s.operand = static_cast<int>(rng.below(kModulus));
    }
    std::string idx = std::to_string(i);
    idx.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(idx.size(), width), '0');
    out.push_back(make_problem(spec.id_prefix + std::to_string(spec.seed) + "-" + idx, v0, std::move(ops)));
  }
  return out;
}

inline TokenSeq expert_solution_tokens(const Problem& p) {
  TokenSeq t;
  t.reserve(2 * p.expert_steps.size() + 3);
  for (int v : p.expert_steps) {
    t.push_back(Token::Step);
    t.push_back(digit_token(v));
  }
  t.push_back(Token::Ans);
  t.push_back(digit_token(p.answer));
  t.push_back(Token::End);
  return t;
}

// Exactly one ANS, immediately followed by one digit and a terminal END.
inline bool check_format(std::span<const Token> t) {
  if (t.size() < 3) return false;
  const std::size_t n = t.size();
  if (t[n - 1] != Token::End || !is_digit(t[n - 2]) || t[n - 3] != Token::Ans) return false;
  return std::count(t.begin(), t.end(), Token::Ans) == 1 && std::count(t.begin(), t.end(), Token::End) == 1;
}

inline std::optional<int> extract_answer(std::span<const Token> t) {
  if (!check_format(t)) return std::nullopt;
  return digit_value(t[t.size() - 2]);
}

inline bool verify_answer(const Problem& p, std::span<const Token> t) {
  const auto a = extract_answer(t);
  return a.has_value() && *a == p.answer;
}

// ---------------------------------------------------------------------------
// Dataset file: one JSON object per line, fields in this fixed order:
//   id, initial_value, ops ([[op, operand], ...]), expert_steps, answer,
//   predefined_rank (integer or null)

inline std::string to_json_line(const Problem& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["initial_value"] = p.initial_value;
  auto ops = nlohmann::ordered_json::array();
  for (const auto& s : p.ops) ops.push_back(nlohmann::ordered_json::array({op_name(s.op), s.operand}));
  j["ops"] = std::move(ops);
  j["expert_steps"] = p.expert_steps;
  j["answer"] = p.answer;
  j["predefined_rank"] = p.predefined_rank ? nlohmann::ordered_json(*p.predefined_rank) : nullptr;
  return j.dump();
}

inline Problem problem_from_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    Problem p;
    p.id = j.at("id").get<std::string>();
    p.initial_value = j.at("initial_value").get<int>();
    for (const auto& s : j.at("ops")) p.ops.push_back({parse_op(s.at(0).get<std::string>()), s.at(1).get<int>()});
    p.expert_steps = j.at("expert_steps").get<std::vector<int>>();
    p.answer = j.at("answer").get<int>();
    if (!j.at("predefined_rank").is_null()) p.predefined_rank = j.at("predefined_rank").get<int>();
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed dataset record: ") + e.what());
  } catch (const ValidationError& e) {
    throw IoError(std::string("invalid dataset record: ") + e.what());
  }
}

inline void write_dataset(const std::string& path, std::span<const Problem> problems) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  for (const auto& p : problems) os << to_json_line(p) << '\n';
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<Problem> read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  std::vector<Problem> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(problem_from_json_line(line));
  }
  return out;
}

}  // namespace gcrl
