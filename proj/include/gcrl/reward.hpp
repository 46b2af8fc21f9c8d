#pragma once

#include <span>

#include "gcrl/taskgen.hpp"

namespace gcrl {

struct RewardConfig {
  double lambda1 = 1.0;  // format weight
  double lambda2 = 2.0;  // accuracy weight
};

inline void validate(const RewardConfig& cfg) {
  if (!(cfg.lambda1 >= 0.0)) throw ValidationError("reward.lambda1 must be >= 0");
  if (!(cfg.lambda2 >= 0.0)) throw ValidationError("reward.lambda2 must be >= 0");
}

struct RewardBreakdown {
  int format = 0;
  int accuracy = 0;
  double total = 0.0;
  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

// total = lambda1 * format + lambda2 * accuracy. Accuracy requires a parseable
// answer, so accuracy == 1 implies format == 1.
inline RewardBreakdown score(const Problem& p, std::span<const Token> t, const RewardConfig& cfg = {}) {
  RewardBreakdown r;
  r.format = check_format(t) ? 1 : 0;
  r.accuracy = verify_answer(p, t) ? 1 : 0;
  r.total = cfg.lambda1 * r.format + cfg.lambda2 * r.accuracy;
  return r;
}

}  // namespace gcrl
