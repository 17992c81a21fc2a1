#include "birar/rewards.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace birar {

const char* reward_mode_name(RewardMode mode) {
  switch (mode) {
    case RewardMode::Outcome: return "outcome";
    case RewardMode::Forward: return "forward";
    case RewardMode::Backward: return "backward";
  }
  return "outcome";
}

RewardMode reward_mode_from_name(const std::string& name) {
  if (name == "outcome") return RewardMode::Outcome;
  if (name == "forward") return RewardMode::Forward;
  if (name == "backward") return RewardMode::Backward;
  throw std::invalid_argument("rewards: unknown reward mode '" + name + "'");
}

double RewardBreakdown::total(RewardMode mode) const {
  switch (mode) {
    case RewardMode::Outcome: return r_outcome;
    case RewardMode::Forward: return r_forward;
    case RewardMode::Backward: return r_backward;
  }
  return r_outcome;
}

double step_reward(double distance) {
  if (!(distance >= 0.0))
    throw std::invalid_argument("rewards: distance must be non-negative");
  return std::exp(-distance);
}

double cascade(const std::vector<double>& rewards, bool correct) {
  double total = 0.0;
  double remaining = 1.0;  // prod_{j<i} (1 - r_j)
  for (double r : rewards) {
    if (!(r >= 0.0 && r <= 1.0))
      throw std::invalid_argument("rewards: step reward outside [0, 1]");
    total += remaining * r;
    remaining *= 1.0 - r;
  }
  return correct ? total : 0.0;
}

std::string normalize_answer(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text) {
    if (std::isalnum(c) || std::isspace(c))
      lowered.push_back(static_cast<char>(std::tolower(c)));
    // punctuation characters are dropped entirely
  }
  std::istringstream in(lowered);
  std::string word;
  std::string out;
  while (in >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

int em(const std::string& prediction, const std::string& gold) {
  return normalize_answer(prediction) == normalize_answer(gold) ? 1 : 0;
}

double outcome_reward(const Trajectory& traj, const std::string& gold) {
  if (!traj.answer.has_value()) return 0.0;
  return static_cast<double>(em(*traj.answer, gold));
}

RewardBreakdown score_trajectory(const LmProvider& provider, const Trajectory& traj,
                                 const std::string& gold, NidVariant variant) {
  RewardBreakdown out;
  out.correct = traj.answer.has_value() && em(*traj.answer, gold) == 1;
  out.r_outcome = out.correct ? 1.0 : 0.0;

  if (traj.answer.has_value()) {
    const size_t n = traj.steps.size();
    out.d_t_a.reserve(n);
    out.d_t_q.reserve(n);
    for (size_t i = 1; i <= n; ++i) {
      const Distance fwd = step_to_answer(provider, traj, i, variant);
      const Distance bwd = step_to_question(provider, traj, i, variant);
      out.d_t_a.push_back(fwd.value);
      out.d_t_q.push_back(bwd.value);
      out.d_t_a_degenerate.push_back(fwd.degenerate);
      out.d_t_q_degenerate.push_back(bwd.degenerate);
      out.r_t_a.push_back(step_reward(fwd.value));
      out.r_t_q.push_back(step_reward(bwd.value));
    }
  }
  out.r_forward = cascade(out.r_t_a, out.correct);
  out.r_backward = cascade(out.r_t_q, out.correct);
  return out;
}

RewardBreakdown forward_reward(const LmProvider& provider, const Trajectory& traj,
                               const std::string& gold, NidVariant variant) {
  return score_trajectory(provider, traj, gold, variant);
}

RewardBreakdown backward_reward(const LmProvider& provider, const Trajectory& traj,
                                const std::string& gold, NidVariant variant) {
  return score_trajectory(provider, traj, gold, variant);
}

}  // namespace birar
