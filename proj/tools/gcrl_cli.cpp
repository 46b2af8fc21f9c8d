#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcrl/harness.hpp"

using namespace gcrl;

namespace {

// Options shared by every subcommand that needs a run config.
struct ConfigArgs {
  std::string preset = "desk";
  std::string config_file;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--preset", preset, "desk or paper")->capture_default_str();
    app->add_option("--config", config_file, "key = value file applied after the preset");
    app->add_option("--set", sets, "key=value override, repeatable");
  }

  RunConfig build() const {
    RunConfig cfg = gcrl::preset(preset);
    if (!config_file.empty()) cfg = load_config_file(config_file, cfg);
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    apply_settings(cfg, kv);
    validate(cfg);
    return cfg;
  }
};

std::vector<Problem> dataset_for(const RunConfig& cfg, const std::string& path) {
  return path.empty() ? build_dataset(cfg.task) : read_dataset(path);
}

PolicyParams params_for(const ChainPolicy& pol, const RunConfig& cfg, const std::string& ckpt) {
  if (!ckpt.empty()) return load_checkpoint(ckpt, pol.features().layout_hash()).params;
  return cfg.zero_init ? pol.zero_params() : make_base_policy(pol, cfg.base_policy);
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::vector<std::string> out;
  for (std::string line; std::getline(is, line);)
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gcrl: curriculum and guided-sampling RL lab"};
  app.require_subcommand(1);

  ConfigArgs cargs;
  std::string data, out, ckpt;
  std::uint64_t seed = 0;
  int rollouts = 0, k = 1, round = 0;

  auto* gen = app.add_subcommand("gen-data", "write a problem dataset as JSONL");
  cargs.attach(gen);
  gen->add_option("--out", out, "output path")->required();

  auto* est = app.add_subcommand("estimate-difficulty", "print id<TAB>difficulty for each problem");
  cargs.attach(est);
  est->add_option("--data", data, "dataset JSONL (default: generate from config)");
  est->add_option("--checkpoint", ckpt, "policy checkpoint (default: base policy)");
  est->add_option("--rollouts", rollouts, "rollouts per problem (default: curriculum.n_rollouts_estimate)");
  est->add_option("--seed", seed);

  std::string strategy, guidance, resume;
  auto* tr = app.add_subcommand("train", "train a policy");
  cargs.attach(tr);
  tr->add_option("--data", data, "dataset JSONL (default: generate from config)");
  tr->add_option("--strategy", strategy, "nocl|pcl|adcl");
  tr->add_option("--guidance", guidance, "none|offpolicy|egsr-a|egsr-sa");
  tr->add_option("--seed", seed);
  tr->add_option("--out", out, "output directory")->required();
  tr->add_option("--resume", resume, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "pass@k on a dataset");
  cargs.attach(ev);
  ev->add_option("--data", data);
  ev->add_option("--checkpoint", ckpt);
  ev->add_option("--pass-at", k, "k")->required();
  ev->add_option("--seed", seed);

  auto* pr = app.add_subcommand("probe-shift", "predefined vs measured ranks on a window");
  cargs.attach(pr);
  pr->add_option("--data", data);
  pr->add_option("--checkpoint", ckpt);
  pr->add_option("--rollouts", rollouts);
  pr->add_option("--round", round);
  pr->add_option("--seed", seed);

  std::vector<std::string> ckpts;
  std::size_t probe_n = 100;
  auto* pp = app.add_subcommand("ppl-study", "perplexity of own, expert and guided samples per checkpoint");
  cargs.attach(pp);
  pp->add_option("--data", data);
  pp->add_option("--checkpoints", ckpts, "checkpoint files in order")->required();
  pp->add_option("--probe", probe_n, "number of leading problems to probe")->capture_default_str();
  pp->add_option("--seed", seed);

  std::string order_a, order_b;
  auto* nr = app.add_subcommand("nir", "normalized inversion rate between two id lists");
  nr->add_option("a", order_a, "file with one id per line")->required();
  nr->add_option("b", order_b, "file with the same ids")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*nr) {
      std::printf("%.6f\n", nir(read_lines(order_a), read_lines(order_b)));
      return 0;
    }
    RunConfig cfg = cargs.build();
    const auto pol = make_chain_policy(cfg.max_len);

    if (*gen) {
      write_dataset(out, build_dataset(cfg.task));
    } else if (*est) {
      const auto ds = dataset_for(cfg, data);
      const int n = rollouts > 0 ? rollouts : cfg.curriculum.n_rollouts_estimate;
      for (const auto& s : estimate_all(pol, params_for(pol, cfg, ckpt), ds, n, cfg.grpo.temperature, seed, 0))
        std::printf("%s\t%.6f\n", s.problem_id.c_str(), s.score);
    } else if (*tr) {
      if (!strategy.empty()) cfg.curriculum.strategy = parse_strategy(strategy);
      if (!guidance.empty()) cfg.guidance = parse_guidance_strategy(guidance);
      cfg.output_dir = out;
      validate(cfg);
      TrainOptions opts;
      if (!resume.empty()) opts.resume = load_checkpoint(resume, pol.features().layout_hash());
      const auto res = train(cfg, dataset_for(cfg, data), seed, opts);
      const auto& last = res.metrics.empty() ? MetricsRecord{} : res.metrics.back();
      std::printf("steps %zu, last mean reward %.4f, checkpoints in %s\n", res.metrics.size(), last.mean_total_reward,
                  out.c_str());
    } else if (*ev) {
      const auto ds = dataset_for(cfg, data);
      const auto r = evaluate_pass_at_k(pol, params_for(pol, cfg, ckpt), ds, k, cfg.grpo.temperature, seed);
      std::printf("pass@%d %.4f (%zu problems)\n", k, r.rate, ds.size());
    } else if (*pr) {
      auto ds = dataset_for(cfg, data);
      // Raw datasets carry no ranking yet: rank by the base policy's round-0 difficulty.
      if (std::any_of(ds.begin(), ds.end(), [](const Problem& p) { return !p.predefined_rank; })) {
        const auto pol0 = make_base_policy(pol, cfg.base_policy);
        const auto scores = estimate_all(pol, pol0, ds, cfg.curriculum.n_rollouts_estimate, cfg.grpo.temperature, seed, 0);
        sort_and_partition(ds, scores, 1);
      }
      const int n = rollouts > 0 ? rollouts : cfg.curriculum.n_rollouts_reestimate;
      const auto rep =
          difficulty_shift_probe(pol, params_for(pol, cfg, ckpt), ds, n, cfg.grpo.temperature, seed, round);
      std::printf("id\tpredefined\tactual\n");
      for (const auto& e : rep.entries) std::printf("%s\t%d\t%d\n", e.problem_id.c_str(), e.predefined_rank, e.actual_rank);
      std::printf("# nir %.6f band [%g, %g]\n", rep.nir, rep.band_low, rep.band_high);
    } else if (*pp) {
      auto ds = dataset_for(cfg, data);
      ds.resize(std::min(ds.size(), probe_n));
      std::vector<PolicyParams> params;
      for (const auto& c : ckpts) params.push_back(load_checkpoint(c, pol.features().layout_hash()).params);
      std::printf("checkpoint\tunguided\tguided_sa\tguided_a\texpert\n");
      for (const auto& r : ppl_study(pol, params, ds, cfg.grpo.temperature, seed))
        std::printf("%zu\t%.4f\t%.4f\t%.4f\t%.4f\n", r.checkpoint, r.unguided, r.guided_solution, r.guided_answer,
                    r.expert);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
