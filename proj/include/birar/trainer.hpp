#pragma once

#include "birar/lm_provider.hpp"
#include "birar/rewards.hpp"
#include "birar/synthenv.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace birar {

// Fixed per-world feature map of the linear softmax policy. The indices are
// documented in docs/reference.md and frozen: checkpoints depend on them.
inline constexpr int kFeatureDim = 12;

std::array<double, kFeatureDim> action_features(const EnvState& state, const ChainView& view,
                                                const Action& action, int max_steps);

struct CandidateSet {
  std::vector<Action> actions;
  std::vector<std::array<double, kFeatureDim>> features;
};

CandidateSet candidates_with_features(const Env& env, const EnvState& state);

// Numerically stabilized softmax.
std::vector<double> softmax(const std::vector<double>& logits);

// Softmax of w . phi(state, a) over the candidate set.
std::vector<double> action_probs(const std::vector<double>& w, const CandidateSet& candidates);

struct DecisionRecord {
  std::vector<std::array<double, kFeatureDim>> features;  // all candidates at this state
  int chosen = 0;
  double logprob_old = 0.0;
};

struct EpisodeRecord {
  std::vector<DecisionRecord> decisions;
  Trajectory trajectory;
  double reward = 0.0;  // total under the configured RewardMode
  double em = 0.0;
  int search_count = 0;
  int response_len = 0;
};

struct RolloutGroup {
  int question_index = -1;
  std::vector<EpisodeRecord> episodes;  // exactly G
  std::vector<double> advantages;       // one per episode, group-standardized
};

struct TrainConfig {
  RewardMode mode = RewardMode::Forward;
  int group_size = 5;          // G
  double learning_rate = 1.0;  // scaled for the small linear policy
  double kl_beta = 0.001;
  double clip_epsilon = 0.2;
  int steps = 200;
  uint64_t seed = 1;
  int inner_epochs = 1;
  bool parallel_rollouts = false;
  NidVariant variant = NidVariant::PaperMinMin;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Samples one episode at temperature 1.0 and scores it under the mode.
EpisodeRecord run_episode(const Env& env, const LmProvider& provider, RewardMode mode,
                          NidVariant variant, const std::vector<double>& w, int question_index,
                          uint64_t episode_seed);

// G independent episodes with per-episode RNG streams derived from group_seed,
// rewards under config.mode, and standardized advantages.
RolloutGroup sample_group(const Env& env, const LmProvider& provider, const TrainConfig& config,
                          const std::vector<double>& w, int question_index, uint64_t group_seed);

// (r_i - mean) / max(population std, 1e-8).
std::vector<double> compute_advantages(const std::vector<double>& rewards);

struct UpdateDiagnostics {
  double objective = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

struct UpdateResult {
  std::vector<double> w;
  UpdateDiagnostics diag;
};

// Clipped GRPO surrogate with a per-action KL penalty to the frozen reference:
//   (1/G) sum_i (1/|y_i|) sum_t [ min(r A, clip(r, 1-eps, 1+eps) A) - beta kl_t ]
// where r is pi_w/pi_old and kl_t = pi_ref/pi_w - log(pi_ref/pi_w) - 1.
// Only policy actions appear; observations carry no loss terms.
double grpo_objective(const std::vector<double>& w, const std::vector<double>& w_ref,
                      const RolloutGroup& group, const TrainConfig& config);

std::vector<double> grpo_gradient(const std::vector<double>& w, const std::vector<double>& w_ref,
                                  const RolloutGroup& group, const TrainConfig& config);

// One ascent step on the surrogate. A non-finite gradient aborts the step and
// returns the incoming parameters with diagnostics.
UpdateResult grpo_update(const std::vector<double>& w, const std::vector<double>& w_ref,
                         const RolloutGroup& group, const TrainConfig& config);

struct MetricsRow {
  int step = 0;
  double reward = 0.0;
  double resp_len = 0.0;
  double search_calls = 0.0;
  double kl = 0.0;
  double clip_frac = 0.0;
};

struct TrainResult {
  std::vector<double> w;
  std::vector<MetricsRow> metrics;
};

// Runs config.steps GRPO iterations over the world's train split. When
// out_dir is nonempty, writes checkpoint.json and metrics.csv there (the log
// is flushed row by row).
TrainResult train(const TrainConfig& config, const Env& env, const LmProvider& provider,
                  const std::string& out_dir);

struct Checkpoint {
  int feature_dim = kFeatureDim;
  std::vector<double> w;
  TrainConfig config;
  int step = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);

}  // namespace birar
