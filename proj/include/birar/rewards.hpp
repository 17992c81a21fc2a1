#pragma once

#include "birar/infodist.hpp"
#include "birar/trajectory.hpp"

#include <string>
#include <vector>

namespace birar {

enum class RewardMode { Outcome, Forward, Backward };

const char* reward_mode_name(RewardMode mode);
RewardMode reward_mode_from_name(const std::string& name);

// Per-step distances and rewards plus the gated cascading totals.
struct RewardBreakdown {
  std::vector<double> d_t_a;
  std::vector<double> d_t_q;
  std::vector<bool> d_t_a_degenerate;
  std::vector<bool> d_t_q_degenerate;
  std::vector<double> r_t_a;  // e^(-d), in (0, 1]
  std::vector<double> r_t_q;
  bool correct = false;
  double r_forward = 0.0;
  double r_backward = 0.0;
  double r_outcome = 0.0;

  double total(RewardMode mode) const;
};

// e^(-d): maps a non-negative distance to a reward in (0, 1], strictly
// decreasing in d.
double step_reward(double distance);

// Correctness-gated cascading aggregation:
//   1[correct] * sum_i [prod_{j<i} (1 - r_j)] r_i
// Later steps contribute less once earlier rewards are high. Each r must be
// in [0, 1].
double cascade(const std::vector<double>& rewards, bool correct);

// Standard open-domain QA answer normalization: lowercase, drop punctuation,
// remove articles a/an/the, collapse whitespace.
std::string normalize_answer(const std::string& text);

// Exact match of normalized answers.
int em(const std::string& prediction, const std::string& gold);

// 1 if the trajectory's final answer exactly matches gold, else 0 (including
// when there is no answer).
double outcome_reward(const Trajectory& traj, const std::string& gold);

// Full breakdown: bidirectional distances per step, per-step rewards, EM gate
// and all three totals.
RewardBreakdown score_trajectory(const LmProvider& provider, const Trajectory& traj,
                                 const std::string& gold,
                                 NidVariant variant = NidVariant::PaperMinMin);

RewardBreakdown forward_reward(const LmProvider& provider, const Trajectory& traj,
                               const std::string& gold,
                               NidVariant variant = NidVariant::PaperMinMin);
RewardBreakdown backward_reward(const LmProvider& provider, const Trajectory& traj,
                                const std::string& gold,
                                NidVariant variant = NidVariant::PaperMinMin);

}  // namespace birar
