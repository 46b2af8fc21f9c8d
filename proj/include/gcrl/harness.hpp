#pragma once

// Training orchestration over the strategy matrix (curriculum x guidance),
// pass@k evaluation, the four-way perplexity study, metrics and checkpoints.
//
// One rollout iteration takes `problems_per_step` problems from the current
// curriculum batch, samples G unguided rollouts per problem from the frozen
// old policy, optionally splices in guided or expert trajectories, freezes
// rewards and advantages, then runs `inner_iters` gradient-ascent steps.
// Every random draw comes from a stream keyed by (seed, purpose, problem,
// iteration), so runs are bitwise reproducible and resumable.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gcrl/chain_features.hpp"
#include "gcrl/checkpoint.hpp"
#include "gcrl/config.hpp"
#include "gcrl/curriculum.hpp"
#include "gcrl/egsr.hpp"
#include "gcrl/errors.hpp"
#include "gcrl/grpo.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

namespace stream_tag {
inline constexpr std::uint64_t kRollout = 0x726f6c6cULL;
inline constexpr std::uint64_t kGuided = 0x67756964ULL;
inline constexpr std::uint64_t kExpert = 0x65787074ULL;
inline constexpr std::uint64_t kEval = 0x6576616cULL;
inline constexpr std::uint64_t kPpl = 0x70706c73ULL;
inline constexpr std::uint64_t kRun = 0x72756e73ULL;
}  // namespace stream_tag

struct MetricsRecord {
  std::int64_t step = 0;
  std::int64_t batch_index = 0;
  double mean_total_reward = 0.0;
  double mean_accuracy_reward = 0.0;
  std::int64_t trigger_count = 0;
  double guided_success_rate = 0.0;
  double objective = 0.0;
  double grad_norm = 0.0;
  std::int64_t wall_ms = 0;
  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline std::string to_json_line(const MetricsRecord& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["batch_index"] = m.batch_index;
  j["mean_total_reward"] = m.mean_total_reward;
  j["mean_accuracy_reward"] = m.mean_accuracy_reward;
  j["trigger_count"] = m.trigger_count;
  j["guided_success_rate"] = m.guided_success_rate;
  j["objective"] = m.objective;
  j["grad_norm"] = m.grad_norm;
  j["wall_ms"] = m.wall_ms;
  return j.dump();
}

// Curriculum and bookkeeping events: "reestimate" (ADCL re-sort),
// "shift_probe" (re-estimation without re-sort), "checkpoint",
// "egsr_fallback" (problem without expert solution).
struct TrainEvent {
  std::string kind;
  std::int64_t step = 0;
  std::int64_t batch_index = 0;
  std::int64_t round = 0;
  double nir = 0.0;
  std::string detail;
  friend bool operator==(const TrainEvent&, const TrainEvent&) = default;
};

inline std::string to_json_line(const TrainEvent& e) {
  nlohmann::ordered_json j;
  j["kind"] = e.kind;
  j["step"] = e.step;
  j["batch_index"] = e.batch_index;
  j["round"] = e.round;
  j["nir"] = e.nir;
  j["detail"] = e.detail;
  return j.dump();
}

struct NirPoint {
  std::int64_t round = 0;
  double nir = 0.0;
  friend bool operator==(const NirPoint&, const NirPoint&) = default;
};

// Everything needed to continue a run from a batch boundary.
struct TrainerState {
  std::uint64_t seed = 0;
  PolicyParams params;
  CurriculumState curriculum;
  std::int64_t step = 0;
  std::int64_t rollout_iter = 0;
  RngStream run_rng;
  std::vector<NirPoint> nir_history;
};

inline std::string encode_trainer_state(const TrainerState& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["step"] = s.step;
  j["rollout_iter"] = s.rollout_iter;
  j["strategy"] = strategy_name(s.curriculum.strategy);
  j["current_batch"] = s.curriculum.current_batch;
  j["batches"] = s.curriculum.batches;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& table : s.curriculum.history) {
    auto t = nlohmann::ordered_json::array();
    for (const auto& d : table)
      t.push_back(nlohmann::ordered_json::array({d.problem_id, d.score, d.n_rollouts, d.estimated_at_step}));
    hist.push_back(std::move(t));
  }
  j["history"] = std::move(hist);
  auto nirs = nlohmann::ordered_json::array();
  for (const auto& p : s.nir_history) nirs.push_back(nlohmann::ordered_json::array({p.round, p.nir}));
  j["nir_history"] = std::move(nirs);
  return j.dump();
}

inline void decode_trainer_state(const std::string& text, TrainerState& s) {
  try {
    const auto j = nlohmann::json::parse(text);
    s.seed = j.at("seed").get<std::uint64_t>();
    s.step = j.at("step").get<std::int64_t>();
    s.rollout_iter = j.at("rollout_iter").get<std::int64_t>();
    s.curriculum.strategy = parse_strategy(j.at("strategy").get<std::string>());
    s.curriculum.current_batch = j.at("current_batch").get<std::size_t>();
    s.curriculum.batches = j.at("batches").get<std::vector<std::vector<std::string>>>();
    s.curriculum.history.clear();
    for (const auto& t : j.at("history")) {
      std::vector<DifficultyScore> table;
      for (const auto& d : t)
        table.push_back({d.at(0).get<std::string>(), d.at(1).get<double>(), d.at(2).get<int>(), d.at(3).get<std::int64_t>()});
      s.curriculum.history.push_back(std::move(table));
    }
    s.nir_history.clear();
    for (const auto& p : j.at("nir_history")) s.nir_history.push_back({p.at(0).get<std::int64_t>(), p.at(1).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt trainer state: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("corrupt trainer state: ") + e.what());
  }
}

inline Checkpoint make_checkpoint(const TrainerState& s) {
  return Checkpoint{s.params, s.run_rng.serialize(), encode_trainer_state(s)};
}

inline TrainerState trainer_state_from(const Checkpoint& c) {
  TrainerState s;
  s.params = c.params;
  s.run_rng = RngStream::deserialize(c.rng_state);
  decode_trainer_state(c.trainer_state, s);
  return s;
}

struct TrainResult {
  PolicyParams params;
  std::vector<MetricsRecord> metrics;
  std::vector<TrainEvent> events;
  std::vector<Checkpoint> checkpoints;
  std::vector<std::string> checkpoint_paths;
  std::vector<NirPoint> nir_history;
  // Problem ids per rollout iteration, in visit order.
  std::vector<std::vector<std::string>> visits;
  CurriculumState curriculum;
};

// Difficulty estimator override: (problem, round, current params) -> score.
using Reestimator = std::function<DifficultyScore(const Problem&, std::uint64_t, const PolicyParams&)>;

struct TrainOptions {
  std::optional<Checkpoint> resume;
  // Stop after this many curriculum batches have completed (counting from
  // the start of the run), leaving the run resumable.
  std::optional<std::size_t> stop_after_batches;
  Reestimator reestimator;
};

// Ids visited in rollout iteration `it` of a batch: consecutive, wrapping.
inline std::vector<std::string> batch_chunk(const std::vector<std::string>& batch, std::size_t it, std::size_t per_step) {
  std::vector<std::string> out;
  if (batch.empty()) return out;
  const std::size_t take = std::min(per_step, batch.size());
  for (std::size_t j = 0; j < take; ++j) out.push_back(batch[(it * per_step + j) % batch.size()]);
  return out;
}

class Trainer {
 public:
  Trainer(RunConfig cfg, std::vector<Problem> dataset, std::uint64_t seed)
      : cfg_(std::move(cfg)), dataset_(std::move(dataset)), seed_(seed), policy_(make_chain_policy(cfg_.max_len)) {
    validate(cfg_);
    if (dataset_.empty()) throw ConfigError("training dataset is empty");
    if (is_egsr(cfg_.guidance) || cfg_.guidance == GuidanceStrategy::OffPolicy) {
      const bool any = std::any_of(dataset_.begin(), dataset_.end(), [](const Problem& p) { return p.has_expert_solution(); });
      if (!any) throw ConfigError("guided strategies need problems with expert solutions");
    }
    for (const auto& p : dataset_) by_id_[p.id] = &p;
  }

  const ChainPolicy& policy() const { return policy_; }

  PolicyParams initial_params() const {
    return cfg_.zero_init ? policy_.zero_params() : make_base_policy(policy_, cfg_.base_policy);
  }

  TrainResult run(const TrainOptions& opts = {}) {
    TrainResult res;
    TrainerState st = opts.resume ? resume_state(*opts.resume) : fresh_state(opts);
    const PolicyParams ref = initial_params();
    open_outputs(opts.resume.has_value(), st.step);

    const std::size_t k_total = st.curriculum.num_batches();
    while (st.curriculum.current_batch < k_total) {
      if (opts.stop_after_batches && st.curriculum.current_batch >= *opts.stop_after_batches) break;
      const std::size_t b = st.curriculum.current_batch;
      for (int it = 0; it < cfg_.steps_per_batch; ++it) {
        auto chunk = batch_chunk(st.curriculum.batches[b], static_cast<std::size_t>(it),
                                 static_cast<std::size_t>(cfg_.problems_per_step));
        if (chunk.empty()) break;
        rollout_iteration(st, ref, b, chunk, res);
        res.visits.push_back(std::move(chunk));
      }
      st.curriculum.current_batch = b + 1;
      if (b + 1 < k_total) boundary_reestimation(st, opts, b, res);
      write_checkpoint(st, b, res);
    }
    res.params = st.params;
    res.nir_history = st.nir_history;
    res.curriculum = st.curriculum;
    return res;
  }

 private:
  TrainerState fresh_state(const TrainOptions& opts) {
    TrainerState st;
    st.seed = seed_;
    st.params = initial_params();
    st.run_rng = RngStream::derive(seed_, stream_tag::kRun);
    st.curriculum.strategy = cfg_.curriculum.strategy;
    const auto k = static_cast<std::size_t>(cfg_.curriculum.batches);
    if (cfg_.curriculum.strategy == CurriculumStrategy::NoCL) {
      std::vector<std::string> ids;
      for (const auto& p : dataset_) ids.push_back(p.id);
      for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[st.run_rng.below(i)]);
      std::size_t pos = 0;
      for (std::size_t sz : partition_sizes(ids.size(), k)) {
        st.curriculum.batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                                           ids.begin() + static_cast<std::ptrdiff_t>(pos + sz));
        pos += sz;
      }
    } else {
      std::vector<DifficultyScore> scores;
      for (const auto& p : dataset_) scores.push_back(estimate(opts, p, 0, st.params, cfg_.curriculum.n_rollouts_estimate, 0));
      st.curriculum = sort_and_partition(dataset_, scores, k, cfg_.curriculum.strategy);
    }
    return st;
  }

  TrainerState resume_state(const Checkpoint& c) {
    policy_.check_compatible(c.params);
    TrainerState st = trainer_state_from(c);
    if (st.seed != seed_) throw ConfigError("checkpoint was written by a run with a different seed");
    if (st.curriculum.strategy != cfg_.curriculum.strategy)
      throw ConfigError("checkpoint curriculum strategy differs from the configuration");
    return st;
  }

  DifficultyScore estimate(const TrainOptions& opts, const Problem& p, std::uint64_t round, const PolicyParams& params,
                           int n_rollouts, std::int64_t step) const {
    if (opts.reestimator) return opts.reestimator(p, round, params);
    auto rng = estimation_stream(seed_, p.id, round);
    return estimate_difficulty(policy_, params, p, n_rollouts, cfg_.grpo.temperature, rng, step);
  }

  void rollout_iteration(TrainerState& st, const PolicyParams& ref, std::size_t batch, const std::vector<std::string>& chunk,
                         TrainResult& res) {
    const auto t0 = std::chrono::steady_clock::now();
    const PolicyParams old = st.params;
    const GrpoConfig& g = cfg_.grpo;
    const auto iter = static_cast<std::uint64_t>(st.rollout_iter);

    std::vector<RolloutGroup> groups;
    std::vector<bool> use_egsr;
    double total_reward = 0.0, accuracy = 0.0;
    std::int64_t triggers = 0, guided_total = 0, guided_ok = 0;
    std::size_t on_policy_samples = 0;

    for (const auto& id : chunk) {
      const Problem& p = *by_id_.at(id);
      const Context ctx = encode_context(p);
      RolloutGroup group;
      group.problem = p;
      auto rng = RngStream::derive(seed_, stream_tag::kRollout, stream_key(id), iter);
      for (int i = 0; i < g.group_size; ++i) {
        group.trajectories.push_back(policy_.sample_trajectory(old, ctx, g.temperature, rng));
        group.provenance.push_back(Provenance::OnPolicy);
      }
      score_group(group, cfg_.reward);
      for (const auto& t : group.trajectories) {
        total_reward += t.reward->total;
        accuracy += t.reward->accuracy;
        ++on_policy_samples;
      }

      bool mixed_egsr = false;
      if (cfg_.guidance != GuidanceStrategy::None && should_trigger(group, cfg_.egsr)) {
        if (!p.has_expert_solution()) {
          log_event(res, {"egsr_fallback", st.step, static_cast<std::int64_t>(batch), 0, 0.0, id});
        } else if (is_egsr(cfg_.guidance)) {
          ++triggers;
          auto grng = RngStream::derive(seed_, stream_tag::kGuided, stream_key(id), iter);
          auto guided = guided_rollouts(policy_, old, p, make_guidance(p, cfg_.egsr.guidance_mode),
                                        cfg_.egsr.guided_count, g.temperature, grng);
          group = assemble_mixed(group, std::move(guided), cfg_.egsr, cfg_.reward);
          for (std::size_t i = 0; i < group.size(); ++i)
            if (group.provenance[i] == Provenance::Guided) {
              ++guided_total;
              guided_ok += group.trajectories[i].reward->accuracy;
            }
          mixed_egsr = true;
        } else {
          ++triggers;
          auto erng = RngStream::derive(seed_, stream_tag::kExpert, stream_key(id), iter);
          const ExpertSampler expert(cfg_.expert_fidelity);
          std::vector<Trajectory> extra;
          for (int i = 0; i < cfg_.egsr.guided_count; ++i) extra.push_back(expert.sample(p, erng, cfg_.max_len));
          group = splice_group(group, std::move(extra), Provenance::ExternalExpert, cfg_.reward);
        }
      }
      if (group.advantages.empty()) fill_advantages(group);
      groups.push_back(std::move(group));
      use_egsr.push_back(mixed_egsr);
    }

    const double inv_groups = 1.0 / static_cast<double>(groups.size());
    for (int inner = 0; inner < g.inner_iters; ++inner) {
      std::vector<double> grad(policy_.num_params(), 0.0);
      double objective = 0.0;
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const PolicyParams* ref_ptr = g.kl_beta > 0.0 ? &ref : nullptr;
        const auto og = use_egsr[gi] ? egsr_objective_and_grad(policy_, st.params, groups[gi], g, ref_ptr)
                                     : grpo_objective_and_grad(policy_, st.params, groups[gi], g, ref_ptr);
        objective += inv_groups * og.objective;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += inv_groups * og.grad[i];
      }
      if (!std::isfinite(objective)) throw NumericError("objective diverged at step " + std::to_string(st.step));
      st.params = sgd_step(st.params, grad, g.learning_rate);

      MetricsRecord m;
      m.step = st.step++;
      m.batch_index = static_cast<std::int64_t>(batch);
      m.mean_total_reward = total_reward / static_cast<double>(on_policy_samples);
      m.mean_accuracy_reward = accuracy / static_cast<double>(on_policy_samples);
      m.trigger_count = triggers;
      m.guided_success_rate = guided_total ? static_cast<double>(guided_ok) / static_cast<double>(guided_total) : 0.0;
      m.objective = objective;
      m.grad_norm = l2_norm(grad);
      if (cfg_.wall_clock)
        m.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      res.metrics.push_back(m);
      if (metrics_out_) metrics_out_ << to_json_line(m) << '\n';
    }
    ++st.rollout_iter;
  }

  void boundary_reestimation(TrainerState& st, const TrainOptions& opts, std::size_t finished_batch, TrainResult& res) {
    const bool adcl = cfg_.curriculum.strategy == CurriculumStrategy::ADCL;
    if (!adcl && !(cfg_.curriculum.probe_shift && cfg_.curriculum.strategy == CurriculumStrategy::PCL)) return;
    const auto round = static_cast<std::uint64_t>(st.curriculum.history.size());
    const PolicyParams& params = st.params;
    const std::int64_t step = st.step;
    // adcl_resort re-estimates the batch after current_batch; step back one
    // since current_batch already points past the finished batch.
    CurriculumState probe = st.curriculum;
    probe.current_batch = finished_batch;
    const auto before = probe.batches[finished_batch + 1];
    CurriculumState after = adcl_resort(std::move(probe), [&](const std::string& id) {
      return estimate(opts, *by_id_.at(id), round, params, cfg_.curriculum.n_rollouts_reestimate, step);
    });
    const auto& reordered = after.batches[finished_batch + 1];
    const double rate = before.size() >= 2 ? nir(before, reordered) : 0.0;
    after.current_batch = st.curriculum.current_batch;
    if (!adcl) after.batches[finished_batch + 1] = before;
    st.curriculum = std::move(after);
    st.nir_history.push_back({static_cast<std::int64_t>(round), rate});
    log_event(res, {adcl ? "reestimate" : "shift_probe", st.step, static_cast<std::int64_t>(finished_batch + 1),
                    static_cast<std::int64_t>(round), rate, ""});
  }

  void write_checkpoint(const TrainerState& st, std::size_t batch, TrainResult& res) {
    Checkpoint c = make_checkpoint(st);
    // Events name the file relative to output_dir so logs do not depend on where the run lives.
    const std::string name = "ckpt-batch" + std::to_string(batch) + ".bin";
    std::string path;
    if (!cfg_.output_dir.empty()) {
      path = (std::filesystem::path(cfg_.output_dir) / name).string();
      save_checkpoint(path, c);
      write_nir_table(st);
    }
    log_event(res, {"checkpoint", st.step, static_cast<std::int64_t>(batch), 0, 0.0, name});
    res.checkpoints.push_back(std::move(c));
    res.checkpoint_paths.push_back(path);
    if (metrics_out_) metrics_out_.flush();
    if (events_out_) events_out_.flush();
  }

  void write_nir_table(const TrainerState& st) const {
    std::ofstream os(std::filesystem::path(cfg_.output_dir) / "nir.tsv", std::ios::binary | std::ios::trunc);
    os << "round\tnir\n";
    os.precision(17);
    for (const auto& p : st.nir_history) os << p.round << '\t' << p.nir << '\n';
  }

  void log_event(TrainResult& res, TrainEvent e) {
    if (events_out_) events_out_ << to_json_line(e) << '\n';
    res.events.push_back(std::move(e));
  }

  // Fresh runs truncate the logs; resumed runs keep records before `step`.
  void open_outputs(bool resuming, std::int64_t step) {
    if (cfg_.output_dir.empty()) return;
    std::filesystem::create_directories(cfg_.output_dir);
    const auto dir = std::filesystem::path(cfg_.output_dir);
    for (const char* name : {"metrics.jsonl", "events.jsonl"}) {
      const auto path = dir / name;
      std::vector<std::string> keep;
      if (resuming) {
        std::ifstream is(path);
        std::string line;
        while (std::getline(is, line)) {
          if (line.empty()) continue;
          const auto j = nlohmann::json::parse(line, nullptr, false);
          if (j.is_discarded() || !j.contains("step")) continue;
          const auto at = j["step"].get<std::int64_t>();
          // Boundary events share the checkpoint's step and precede it.
          const bool boundary = j.contains("kind") && j["kind"] != "egsr_fallback";
          if (at < step || (at == step && boundary)) keep.push_back(line);
        }
      }
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      for (const auto& l : keep) os << l << '\n';
    }
    metrics_out_.open(dir / "metrics.jsonl", std::ios::binary | std::ios::app);
    events_out_.open(dir / "events.jsonl", std::ios::binary | std::ios::app);
    if (!metrics_out_ || !events_out_) throw IoError("cannot open metrics files in " + cfg_.output_dir);
  }

  RunConfig cfg_;
  std::vector<Problem> dataset_;
  std::uint64_t seed_;
  ChainPolicy policy_;
  std::unordered_map<std::string, const Problem*> by_id_;
  std::ofstream metrics_out_;
  std::ofstream events_out_;
};

inline TrainResult train(const RunConfig& cfg, std::vector<Problem> dataset, std::uint64_t seed,
                         const TrainOptions& opts = {}) {
  Trainer t(cfg, std::move(dataset), seed);
  return t.run(opts);
}

// ---------------------------------------------------------------------------

struct PassAtK {
  std::vector<bool> passed;
  double rate = 0.0;
};

// Sample i of a problem always comes from the same stream, so pass@k for a
// smaller k evaluates a prefix of the pool used for a larger k.
template <class Policy>
PassAtK evaluate_pass_at_k(const Policy& policy, const PolicyParams& params, std::span<const Problem> problems, int k,
                           double temperature, std::uint64_t seed) {
  if (k < 1) throw ValidationError("pass@k needs k >= 1");
  PassAtK out;
  std::size_t hits = 0;
  for (const auto& p : problems) {
    const Context ctx = encode_context(p);
    bool ok = false;
    for (int i = 0; i < k && !ok; ++i) {
      auto rng = RngStream::derive(seed, stream_tag::kEval, stream_key(p.id), static_cast<std::uint64_t>(i));
      ok = verify_answer(p, policy.sample_trajectory(params, ctx, temperature, rng).tokens);
    }
    out.passed.push_back(ok);
    hits += ok ? 1 : 0;
  }
  out.rate = problems.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(problems.size());
  return out;
}

struct PplRow {
  std::size_t checkpoint = 0;
  double unguided = 0.0;             // tau_q
  double expert = 0.0;               // s
  double guided_solution = 0.0;      // tau_{s,a}
  double guided_answer = 0.0;        // tau_a
};

// Mean perplexity under the unguided policy of each checkpoint for: its own
// samples, the expert solutions, and its samples guided by (s,a) and by a.
template <class Policy>
std::vector<PplRow> ppl_study(const Policy& policy, std::span<const PolicyParams> checkpoints,
                              std::span<const Problem> probe, double temperature, std::uint64_t seed) {
  std::vector<PplRow> rows;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const PolicyParams& params = checkpoints[c];
    PplRow row;
    row.checkpoint = c;
    for (const auto& p : probe) {
      if (!p.has_expert_solution()) throw ValidationError("ppl_study: probe problem " + p.id + " lacks an expert solution");
      const Context plain = encode_context(p);
      auto rng = RngStream::derive(seed, stream_tag::kPpl, stream_key(p.id), static_cast<std::uint64_t>(c));
      const auto tq = policy.sample_trajectory(params, plain, temperature, rng);
      const auto tsa = policy.sample_trajectory(
          params, encode_context(p, make_guidance(p, GuidanceMode::SolutionAndAnswer)), temperature, rng);
      const auto ta =
          policy.sample_trajectory(params, encode_context(p, make_guidance(p, GuidanceMode::AnswerOnly)), temperature, rng);
      row.unguided += policy.perplexity(params, plain, tq.tokens);
      row.expert += policy.perplexity(params, plain, expert_solution_tokens(p));
      row.guided_solution += policy.perplexity(params, plain, tsa.tokens);
      row.guided_answer += policy.perplexity(params, plain, ta.tokens);
    }
    const double n = static_cast<double>(std::max<std::size_t>(probe.size(), 1));
    row.unguided /= n;
    row.expert /= n;
    row.guided_solution /= n;
    row.guided_answer /= n;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gcrl
