#pragma once

// Run configuration: flat `key = value` text, presets, and CLI overrides.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gcrl/chain_features.hpp"
#include "gcrl/curriculum.hpp"
#include "gcrl/egsr.hpp"
#include "gcrl/errors.hpp"
#include "gcrl/grpo.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class GuidanceStrategy : std::uint8_t { None = 0, OffPolicy = 1, EgsrAnswer = 2, EgsrSolutionAnswer = 3 };

inline std::string_view guidance_strategy_name(GuidanceStrategy g) {
  switch (g) {
    case GuidanceStrategy::None: return "none";
    case GuidanceStrategy::OffPolicy: return "offpolicy";
    case GuidanceStrategy::EgsrAnswer: return "egsr-a";
    case GuidanceStrategy::EgsrSolutionAnswer: return "egsr-sa";
  }
  return "?";
}

inline bool is_egsr(GuidanceStrategy g) {
  return g == GuidanceStrategy::EgsrAnswer || g == GuidanceStrategy::EgsrSolutionAnswer;
}

struct CurriculumConfig {
  CurriculumStrategy strategy = CurriculumStrategy::NoCL;
  int batches = 4;
  int n_rollouts_estimate = 32;
  int n_rollouts_reestimate = 16;
  // Re-estimate the next batch at every boundary even without ADCL, to
  // measure difficulty shift; the order is only changed under ADCL.
  bool probe_shift = false;
};

struct RunConfig {
  TaskSpec task;
  RewardConfig reward;
  GrpoConfig grpo;
  GuidanceStrategy guidance = GuidanceStrategy::None;
  EgsrConfig egsr;
  CurriculumConfig curriculum;
  BasePolicySpec base_policy;
  bool zero_init = false;
  int steps_per_batch = 38;
  int problems_per_step = 4;
  std::size_t max_len = kDefaultMaxLen;
  double expert_fidelity = 0.99;
  bool wall_clock = false;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir;
  std::string preset_name = "desk";
};

inline void validate(const RunConfig& c) {
  try {
    validate(c.task);
    validate(c.reward);
    validate(c.grpo);
    if (is_egsr(c.guidance) || c.guidance == GuidanceStrategy::OffPolicy) {
      EgsrConfig e = c.egsr;
      if (c.guidance == GuidanceStrategy::OffPolicy) e.guidance_mode = GuidanceMode::SolutionAndAnswer;
      validate(e, c.grpo);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (c.curriculum.batches < 1) throw ConfigError("curriculum.batches must be >= 1");
  if (c.curriculum.n_rollouts_estimate < 1 || c.curriculum.n_rollouts_reestimate < 1)
    throw ConfigError("curriculum rollout counts must be >= 1");
  if (c.steps_per_batch < 0) throw ConfigError("harness.steps_per_batch must be >= 0");
  if (c.problems_per_step < 1) throw ConfigError("harness.problems_per_step must be >= 1");
  if (c.max_len < 2 * static_cast<std::size_t>(c.task.n_max) + 3)
    throw ConfigError("harness.max_len too short for the longest expert solution");
  if (c.seeds.empty()) throw ConfigError("harness.seeds must be non-empty");
  if (!(c.expert_fidelity > 0.0 && c.expert_fidelity < 1.0)) throw ConfigError("offpolicy.expert_fidelity must be in (0,1)");
}

// Hyperparameters as published for the 7B setting.
inline RunConfig paper_preset() {
  RunConfig c;
  c.preset_name = "paper";
  c.grpo = GrpoConfig{8, 0.2, 0.0, 4, 1e-6, 0.7};
  c.egsr.guided_count = 4;
  c.curriculum.batches = 4;
  c.curriculum.n_rollouts_estimate = 32;
  c.curriculum.n_rollouts_reestimate = 32;
  return c;
}

// Desk-scale defaults: same group/clip/iteration settings, a learning rate
// sized for the linear policy, and cheaper mid-training re-estimation.
inline RunConfig desk_preset() {
  RunConfig c;
  c.preset_name = "desk";
  c.grpo = GrpoConfig{8, 0.2, 0.0, 4, 10.0, 0.7};
  c.egsr.guided_count = 4;
  c.curriculum.batches = 4;
  c.curriculum.n_rollouts_estimate = 32;
  c.curriculum.n_rollouts_reestimate = 16;
  return c;
}

inline RunConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + name + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T x{};
  is >> x;
  if (is.fail() || !is.eof()) throw ConfigError("bad value for " + key + ": '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

}  // namespace detail

inline CurriculumStrategy parse_strategy(const std::string& v) {
  if (v == "nocl") return CurriculumStrategy::NoCL;
  if (v == "pcl") return CurriculumStrategy::PCL;
  if (v == "adcl") return CurriculumStrategy::ADCL;
  throw ConfigError("unknown curriculum strategy '" + v + "'");
}

inline GuidanceStrategy parse_guidance_strategy(const std::string& v) {
  if (v == "none") return GuidanceStrategy::None;
  if (v == "offpolicy") return GuidanceStrategy::OffPolicy;
  if (v == "egsr-a") return GuidanceStrategy::EgsrAnswer;
  if (v == "egsr-sa") return GuidanceStrategy::EgsrSolutionAnswer;
  throw ConfigError("unknown guidance strategy '" + v + "'");
}

inline void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_bool;
  using detail::parse_number;
  const std::string v = detail::trim(raw);
  if (key == "task.n_min") c.task.n_min = parse_number<int>(key, v);
  else if (key == "task.n_max") c.task.n_max = parse_number<int>(key, v);
  else if (key == "task.count") c.task.count = parse_number<int>(key, v);
  else if (key == "task.seed") c.task.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "task.modulus") c.task.modulus = parse_number<int>(key, v);
  else if (key == "task.ops") {
    c.task.op_set.clear();
    try {
      for (const auto& s : detail::split_list(v)) c.task.op_set.push_back(parse_op(s));
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
  else if (key == "reward.lambda1") c.reward.lambda1 = parse_number<double>(key, v);
  else if (key == "reward.lambda2") c.reward.lambda2 = parse_number<double>(key, v);
  else if (key == "grpo.group_size") c.grpo.group_size = parse_number<int>(key, v);
  else if (key == "grpo.clip_eps") c.grpo.clip_eps = parse_number<double>(key, v);
  else if (key == "grpo.kl_beta") c.grpo.kl_beta = parse_number<double>(key, v);
  else if (key == "grpo.inner_iters") c.grpo.inner_iters = parse_number<int>(key, v);
  else if (key == "grpo.learning_rate") c.grpo.learning_rate = parse_number<double>(key, v);
  else if (key == "grpo.temperature") c.grpo.temperature = parse_number<double>(key, v);
  else if (key == "egsr.guided_count") c.egsr.guided_count = parse_number<int>(key, v);
  else if (key == "egsr.trigger") {
    if (v == "total_reward_zero") c.egsr.trigger = TriggerMode::TotalRewardZero;
    else if (v == "accuracy_zero") c.egsr.trigger = TriggerMode::AccuracyZero;
    else throw ConfigError("unknown egsr.trigger '" + v + "'");
  }
  else if (key == "egsr.guidance_mode") {
    if (v == "answer_only") c.egsr.guidance_mode = GuidanceMode::AnswerOnly;
    else if (v == "solution_and_answer") c.egsr.guidance_mode = GuidanceMode::SolutionAndAnswer;
    else throw ConfigError("unknown egsr.guidance_mode '" + v + "'");
  }
  else if (key == "harness.guidance") {
    c.guidance = parse_guidance_strategy(v);
    if (c.guidance == GuidanceStrategy::EgsrAnswer) c.egsr.guidance_mode = GuidanceMode::AnswerOnly;
    if (c.guidance == GuidanceStrategy::EgsrSolutionAnswer) c.egsr.guidance_mode = GuidanceMode::SolutionAndAnswer;
  }
  else if (key == "curriculum.strategy") c.curriculum.strategy = parse_strategy(v);
  else if (key == "curriculum.batches") c.curriculum.batches = parse_number<int>(key, v);
  else if (key == "curriculum.n_rollouts_estimate") c.curriculum.n_rollouts_estimate = parse_number<int>(key, v);
  else if (key == "curriculum.n_rollouts_reestimate") c.curriculum.n_rollouts_reestimate = parse_number<int>(key, v);
  else if (key == "curriculum.probe_shift") c.curriculum.probe_shift = parse_bool(key, v);
  else if (key == "harness.steps_per_batch") c.steps_per_batch = parse_number<int>(key, v);
  else if (key == "harness.problems_per_step") c.problems_per_step = parse_number<int>(key, v);
  else if (key == "harness.max_len") c.max_len = parse_number<std::size_t>(key, v);
  else if (key == "harness.wall_clock") c.wall_clock = parse_bool(key, v);
  else if (key == "harness.output_dir") c.output_dir = v;
  else if (key == "harness.seeds") {
    c.seeds.clear();
    for (const auto& s : detail::split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>(key, s));
  }
  else if (key == "harness.preset") {
    c = preset(v);
  }
  else if (key == "policy.init") {
    if (v == "base") c.zero_init = false;
    else if (v == "zero") c.zero_init = true;
    else throw ConfigError("policy.init must be base or zero");
  }
  else if (key == "policy.base_seed") c.base_policy.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "policy.known_strength") c.base_policy.known_strength = parse_number<double>(key, v);
  else if (key == "policy.weak_strength") c.base_policy.weak_strength = parse_number<double>(key, v);
  else if (key == "policy.misconception_strength") c.base_policy.misconception_strength = parse_number<double>(key, v);
  else if (key == "policy.misconception_residual") c.base_policy.misconception_residual = parse_number<double>(key, v);
  else if (key == "policy.hint_strength") c.base_policy.hint_strength = parse_number<double>(key, v);
  else if (key == "policy.copy_strength") c.base_policy.copy_strength = parse_number<double>(key, v);
  else if (key == "policy.format_strength") c.base_policy.format_strength = parse_number<double>(key, v);
  else if (key.rfind("policy.knowledge.", 0) == 0) {
    const Op op = [&] {
      try {
        return parse_op(key.substr(17));
      } catch (const ValidationError&) {
        throw ConfigError("unknown configuration key '" + key + "'");
      }
    }();
    const auto parts = detail::split_list(v);
    if (parts.size() != 3) throw ConfigError(key + " expects known,weak,misconceived probabilities");
    auto& row = c.base_policy.knowledge[static_cast<std::size_t>(op)];
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += (row[i] = parse_number<double>(key, parts[i]));
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(key + " probabilities must sum to 1");
  }
  else if (key == "offpolicy.expert_fidelity") c.expert_fidelity = parse_number<double>(key, v);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

// Parses `key = value` lines; '#' starts a comment. Later keys win.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return out;
}

inline void apply_settings(RunConfig& c, const std::vector<std::pair<std::string, std::string>>& kv) {
  // A preset key resets the config, so it must be applied first.
  for (const auto& [k, v] : kv)
    if (k == "harness.preset") apply_setting(c, k, v);
  for (const auto& [k, v] : kv)
    if (k != "harness.preset") apply_setting(c, k, v);
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = desk_preset()) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  apply_settings(base, parse_config_text(ss.str()));
  return base;
}

// Canonical text form; parse(dump(c)) reproduces c.
inline std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto ops = [&] {
    std::string s;
    for (std::size_t i = 0; i < c.task.op_set.size(); ++i) s += (i ? "," : "") + std::string(op_name(c.task.op_set[i]));
    return s;
  };
  auto seeds = [&] {
    std::string s;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
    return s;
  };
  os << "harness.preset = " << c.preset_name << "\n";
  os << "task.n_min = " << c.task.n_min << "\ntask.n_max = " << c.task.n_max << "\ntask.count = " << c.task.count
     << "\ntask.seed = " << c.task.seed << "\ntask.ops = " << ops() << "\n";
  os << "reward.lambda1 = " << c.reward.lambda1 << "\nreward.lambda2 = " << c.reward.lambda2 << "\n";
  os << "grpo.group_size = " << c.grpo.group_size << "\ngrpo.clip_eps = " << c.grpo.clip_eps
     << "\ngrpo.kl_beta = " << c.grpo.kl_beta << "\ngrpo.inner_iters = " << c.grpo.inner_iters
     << "\ngrpo.learning_rate = " << c.grpo.learning_rate << "\ngrpo.temperature = " << c.grpo.temperature << "\n";
  os << "harness.guidance = " << guidance_strategy_name(c.guidance) << "\n";
  os << "egsr.guided_count = " << c.egsr.guided_count << "\negsr.trigger = "
     << (c.egsr.trigger == TriggerMode::TotalRewardZero ? "total_reward_zero" : "accuracy_zero")
     << "\negsr.guidance_mode = " << guidance_mode_name(c.egsr.guidance_mode) << "\n";
  os << "curriculum.strategy = " << strategy_name(c.curriculum.strategy) << "\ncurriculum.batches = "
     << c.curriculum.batches << "\ncurriculum.n_rollouts_estimate = " << c.curriculum.n_rollouts_estimate
     << "\ncurriculum.n_rollouts_reestimate = " << c.curriculum.n_rollouts_reestimate
     << "\ncurriculum.probe_shift = " << (c.curriculum.probe_shift ? "true" : "false") << "\n";
  os << "harness.steps_per_batch = " << c.steps_per_batch << "\nharness.problems_per_step = " << c.problems_per_step
     << "\nharness.max_len = " << c.max_len << "\nharness.wall_clock = " << (c.wall_clock ? "true" : "false")
     << "\nharness.seeds = " << seeds() << "\n";
  if (!c.output_dir.empty()) os << "harness.output_dir = " << c.output_dir << "\n";
  os << "policy.init = " << (c.zero_init ? "zero" : "base") << "\npolicy.base_seed = " << c.base_policy.seed
     << "\npolicy.known_strength = " << c.base_policy.known_strength
     << "\npolicy.weak_strength = " << c.base_policy.weak_strength
     << "\npolicy.misconception_strength = " << c.base_policy.misconception_strength
     << "\npolicy.misconception_residual = " << c.base_policy.misconception_residual
     << "\npolicy.hint_strength = " << c.base_policy.hint_strength
     << "\npolicy.copy_strength = " << c.base_policy.copy_strength
     << "\npolicy.format_strength = " << c.base_policy.format_strength << "\n";
  for (std::size_t o = 0; o < kNumOps; ++o) {
    const auto& row = c.base_policy.knowledge[o];
    os << "policy.knowledge." << op_name(static_cast<Op>(o)) << " = " << row[0] << "," << row[1] << "," << row[2] << "\n";
  }
  os << "offpolicy.expert_fidelity = " << c.expert_fidelity << "\n";
  return os.str();
}

}  // namespace gcrl
