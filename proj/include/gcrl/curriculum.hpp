#pragma once

// Difficulty estimation, predefined and adaptive curricula, the normalized
// inversion rate between two orderings, and the difficulty-shift probe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gcrl/errors.hpp"
#include "gcrl/policy.hpp"
#include "gcrl/reward.hpp"
#include "gcrl/rng.hpp"
#include "gcrl/taskgen.hpp"

namespace gcrl {

enum class CurriculumStrategy : std::uint8_t { NoCL = 0, PCL = 1, ADCL = 2 };

inline std::string_view strategy_name(CurriculumStrategy s) {
  switch (s) {
    case CurriculumStrategy::NoCL: return "nocl";
    case CurriculumStrategy::PCL: return "pcl";
    case CurriculumStrategy::ADCL: return "adcl";
  }
  return "?";
}

struct DifficultyScore {
  std::string problem_id;
  double score = 1.0;  // 1 - success rate
  int n_rollouts = 1;
  std::int64_t estimated_at_step = 0;
  friend bool operator==(const DifficultyScore&, const DifficultyScore&) = default;
};

inline DifficultyScore make_score(std::string id, int successes, int n_rollouts, std::int64_t step = 0) {
  if (n_rollouts < 1) throw ValidationError("n_rollouts must be >= 1");
  return {std::move(id), 1.0 - static_cast<double>(successes) / n_rollouts, n_rollouts, step};
}

template <class Policy>
DifficultyScore estimate_difficulty(const Policy& policy, const PolicyParams& params, const Problem& p, int n_rollouts,
                                    double temperature, RngStream& rng, std::int64_t step = 0) {
  if (n_rollouts < 1) throw ValidationError("estimate_difficulty: n_rollouts must be >= 1");
  const Context ctx = encode_context(p);
  int successes = 0;
  for (int i = 0; i < n_rollouts; ++i) {
    const auto traj = policy.sample_trajectory(params, ctx, temperature, rng);
    successes += verify_answer(p, traj.tokens) ? 1 : 0;
  }
  return make_score(p.id, successes, n_rollouts, step);
}

// Stream for estimating problem `id` in round `round`.
inline RngStream estimation_stream(std::uint64_t seed, std::string_view id, std::uint64_t round) {
  return RngStream::derive(seed, 0x65737469ULL, stream_key(id), round);
}

template <class Policy>
std::vector<DifficultyScore> estimate_all(const Policy& policy, const PolicyParams& params,
                                          std::span<const Problem> problems, int n_rollouts, double temperature,
                                          std::uint64_t seed, std::uint64_t round, std::int64_t step = 0) {
  std::vector<DifficultyScore> out;
  out.reserve(problems.size());
  for (const auto& p : problems) {
    auto rng = estimation_stream(seed, p.id, round);
    out.push_back(estimate_difficulty(policy, params, p, n_rollouts, temperature, rng, step));
  }
  return out;
}

struct CurriculumState {
  std::vector<std::vector<std::string>> batches;
  std::size_t current_batch = 0;
  std::vector<std::vector<DifficultyScore>> history;
  CurriculumStrategy strategy = CurriculumStrategy::PCL;

  std::size_t num_batches() const { return batches.size(); }
  friend bool operator==(const CurriculumState&, const CurriculumState&) = default;
};

// Sizes of K contiguous batches over m items, larger batches first.
inline std::vector<std::size_t> partition_sizes(std::size_t m, std::size_t k) {
  if (k == 0) throw ValidationError("number of batches must be >= 1");
  std::vector<std::size_t> sizes(k, m / k);
  for (std::size_t i = 0; i < m % k; ++i) ++sizes[i];
  return sizes;
}

inline std::unordered_map<std::string, double> score_lookup(std::span<const DifficultyScore> scores) {
  std::unordered_map<std::string, double> by_id;
  for (const auto& s : scores) by_id[s.problem_id] = s.score;
  return by_id;
}

// Stable ascending sort of ids by score.
inline void stable_sort_by_score(std::vector<std::string>& ids, const std::unordered_map<std::string, double>& by_id) {
  for (const auto& id : ids)
    if (!by_id.count(id)) throw ValidationError("missing difficulty score for " + id);
  std::stable_sort(ids.begin(), ids.end(),
                   [&by_id](const std::string& a, const std::string& b) { return by_id.at(a) < by_id.at(b); });
}

// Sorts the dataset by ascending difficulty (ties keep dataset order), records
// each problem's post-sort position as its predefined rank, and splits the
// sorted order into K contiguous batches.
inline CurriculumState sort_and_partition(std::span<Problem> dataset, std::span<const DifficultyScore> scores,
                                          std::size_t k, CurriculumStrategy strategy = CurriculumStrategy::PCL) {
  const auto by_id = score_lookup(scores);
  std::vector<std::string> ids;
  ids.reserve(dataset.size());
  for (const auto& p : dataset) ids.push_back(p.id);
  stable_sort_by_score(ids, by_id);

  std::unordered_map<std::string, int> rank;
  for (std::size_t i = 0; i < ids.size(); ++i) rank[ids[i]] = static_cast<int>(i);
  for (auto& p : dataset) p.predefined_rank = rank.at(p.id);

  CurriculumState st;
  st.strategy = strategy;
  std::size_t pos = 0;
  for (std::size_t sz : partition_sizes(ids.size(), k)) {
    st.batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(pos),
                            ids.begin() + static_cast<std::ptrdiff_t>(pos + sz));
    pos += sz;
  }
  st.history.emplace_back(scores.begin(), scores.end());
  return st;
}

// Re-estimates the next batch with `reestimate(id) -> DifficultyScore`,
// stable re-sorts only that batch, and appends the scores to history.
template <class Reestimate>
CurriculumState adcl_resort(CurriculumState state, Reestimate&& reestimate) {
  if (state.batches.empty() || state.current_batch + 1 >= state.batches.size())
    throw ValidationError("adcl_resort: no batch left after the current one");
  auto& next = state.batches[state.current_batch + 1];
  std::vector<DifficultyScore> table;
  table.reserve(next.size());
  for (const auto& id : next) table.push_back(reestimate(id));
  stable_sort_by_score(next, score_lookup(table));
  state.history.push_back(std::move(table));
  return state;
}

// ADCL re-sort driven by the current policy; round = number of prior tables.
template <class Policy>
CurriculumState adcl_resort(const Policy& policy, const PolicyParams& params, CurriculumState state,
                            const std::unordered_map<std::string, const Problem*>& problems, int n_rollouts,
                            double temperature, std::uint64_t seed, std::int64_t step = 0) {
  const auto round = static_cast<std::uint64_t>(state.history.size());
  return adcl_resort(std::move(state), [&](const std::string& id) {
    const auto it = problems.find(id);
    if (it == problems.end()) throw ValidationError("adcl_resort: unknown problem " + id);
    auto rng = estimation_stream(seed, id, round);
    return estimate_difficulty(policy, params, *it->second, n_rollouts, temperature, rng, step);
  });
}

// ---------------------------------------------------------------------------
// Normalized inversion rate: discordant pairs / C(n, 2), counted by merge sort.

namespace detail {

inline std::uint64_t count_inversions(std::vector<std::size_t>& a, std::vector<std::size_t>& buf, std::size_t lo,
                                      std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(a, buf, lo, mid) + count_inversions(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      inv += mid - i;
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

}  // namespace detail

template <class Id>
std::uint64_t discordant_pairs(std::span<const Id> order_a, std::span<const Id> order_b) {
  if (order_a.size() != order_b.size()) throw ValidationError("nir: orders differ in length");
  std::map<Id, std::size_t> pos_a;
  for (std::size_t i = 0; i < order_a.size(); ++i)
    if (!pos_a.emplace(order_a[i], i).second) throw ValidationError("nir: duplicate id in first order");
  std::vector<std::size_t> seq;
  seq.reserve(order_b.size());
  std::set<std::size_t> seen;
  for (const auto& id : order_b) {
    const auto it = pos_a.find(id);
    if (it == pos_a.end()) throw ValidationError("nir: orders contain different ids");
    if (!seen.insert(it->second).second) throw ValidationError("nir: duplicate id in second order");
    seq.push_back(it->second);
  }
  std::vector<std::size_t> buf(seq.size());
  return detail::count_inversions(seq, buf, 0, seq.size());
}

template <class Id>
double nir(std::span<const Id> order_a, std::span<const Id> order_b) {
  if (order_a.size() < 2) throw ValidationError("nir: need at least 2 items");
  const double n = static_cast<double>(order_a.size());
  return static_cast<double>(discordant_pairs(order_a, order_b)) / (n * (n - 1.0) / 2.0);
}

inline double nir(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return nir<std::string>(std::span<const std::string>(a), std::span<const std::string>(b));
}

// ---------------------------------------------------------------------------
// Difficulty-shift probe.

struct ProbeEntry {
  std::string problem_id;
  int predefined_rank = 0;
  int actual_rank = 0;
  int round = 0;
};

struct ProbeReport {
  std::vector<ProbeEntry> entries;  // in predefined order
  double band_low = 0.0;            // 25th percentile of actual - predefined
  double band_high = 0.0;           // 75th percentile
  double nir = 0.0;
};

// Nearest-rank percentile of an ascending sample.
inline double nearest_rank_percentile(std::span<const double> sorted, double pct) {
  if (sorted.empty()) throw ValidationError("percentile of an empty sample");
  const auto n = static_cast<double>(sorted.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(pct / 100.0 * n)));
  return sorted[std::min(rank, sorted.size()) - 1];
}

// Ranks the window by measured difficulty (ascending, ties by predefined
// rank) and compares against the predefined ranking. `estimate(problem)`
// returns the current difficulty score.
template <class Estimate>
ProbeReport difficulty_shift_probe(std::span<const Problem> window, Estimate&& estimate, int round = 0) {
  if (window.empty()) throw ValidationError("probe: empty window");
  std::vector<const Problem*> predefined;
  for (const auto& p : window) {
    if (!p.predefined_rank) throw ValidationError("probe: problem " + p.id + " has no predefined rank");
    predefined.push_back(&p);
  }
  std::sort(predefined.begin(), predefined.end(),
            [](const Problem* a, const Problem* b) { return *a->predefined_rank < *b->predefined_rank; });
  std::unordered_map<std::string, double> delta;
  for (const Problem* p : predefined) delta[p->id] = estimate(*p).score;
  std::vector<const Problem*> actual = predefined;
  std::stable_sort(actual.begin(), actual.end(),
                   [&delta](const Problem* a, const Problem* b) { return delta.at(a->id) < delta.at(b->id); });

  std::unordered_map<std::string, int> actual_rank;
  for (std::size_t i = 0; i < actual.size(); ++i) actual_rank[actual[i]->id] = *predefined[i]->predefined_rank;

  ProbeReport rep;
  std::vector<double> dev;
  std::vector<std::string> order_pre, order_act;
  for (const Problem* p : predefined) {
    rep.entries.push_back({p->id, *p->predefined_rank, actual_rank.at(p->id), round});
    dev.push_back(static_cast<double>(actual_rank.at(p->id) - *p->predefined_rank));
    order_pre.push_back(p->id);
  }
  for (const Problem* p : actual) order_act.push_back(p->id);
  std::sort(dev.begin(), dev.end());
  rep.band_low = nearest_rank_percentile(dev, 25.0);
  rep.band_high = nearest_rank_percentile(dev, 75.0);
  rep.nir = order_pre.size() >= 2 ? nir(order_pre, order_act) : 0.0;
  return rep;
}

template <class Policy>
ProbeReport difficulty_shift_probe(const Policy& policy, const PolicyParams& params, std::span<const Problem> window,
                                   int n_rollouts, double temperature, std::uint64_t seed, int round = 0) {
  return difficulty_shift_probe(
      window,
      [&](const Problem& p) {
        auto rng = estimation_stream(seed, p.id, static_cast<std::uint64_t>(round));
        return estimate_difficulty(policy, params, p, n_rollouts, temperature, rng);
      },
      round);
}

}  // namespace gcrl
