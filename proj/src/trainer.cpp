#include "birar/trainer.hpp"

#include "birar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>

#include "json.hpp"

namespace birar {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::array<double, kFeatureDim> action_features(const EnvState& state, const ChainView& view,
                                                const Action& action, int max_steps) {
  std::array<double, kFeatureDim> f{};
  const double budget_frac =
      static_cast<double>(state.step_index + 1) / static_cast<double>(max_steps);
  if (action.type == Action::Type::Answer) {
    f[0] = 1.0;
    const bool frontier = action.entity == view.frontier_entity;
    if (frontier && view.complete) f[1] = 1.0;
    if (frontier && !view.complete) f[2] = 1.0;
    if (!frontier) f[3] = 1.0;
    f[4] = budget_frac;
  } else {
    if (action.entity == view.frontier_entity && action.relation == view.next_relation &&
        !view.complete)
      f[5] = 1.0;
    if (action.relation == view.next_relation && !view.complete) f[6] = 1.0;
    if (action.entity == view.frontier_entity) f[7] = 1.0;
    const bool repeat =
        std::find(state.searched_pairs.begin(), state.searched_pairs.end(),
                  std::make_pair(action.entity, action.relation)) != state.searched_pairs.end();
    if (repeat) f[8] = 1.0;
    if (view.complete) f[9] = 1.0;
    f[10] = budget_frac;
    f[11] = 1.0;
  }
  return f;
}

CandidateSet candidates_with_features(const Env& env, const EnvState& state) {
  CandidateSet cs;
  cs.actions = env.candidate_actions(state);
  const ChainView view = env.chain_view(state);
  const int max_steps = env.world().params.max_steps;
  cs.features.reserve(cs.actions.size());
  for (const Action& a : cs.actions)
    cs.features.push_back(action_features(state, view, a, max_steps));
  return cs;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("trainer: empty candidate set");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max_logit);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> action_probs(const std::vector<double>& w, const CandidateSet& candidates) {
  if (w.size() != static_cast<size_t>(kFeatureDim))
    throw std::invalid_argument("trainer: parameter vector has wrong dimension");
  std::vector<double> logits(candidates.features.size());
  for (size_t i = 0; i < candidates.features.size(); ++i) {
    double dot = 0.0;
    for (int d = 0; d < kFeatureDim; ++d) dot += w[static_cast<size_t>(d)] * candidates.features[i][static_cast<size_t>(d)];
    logits[i] = dot;
  }
  return softmax(logits);
}

EpisodeRecord run_episode(const Env& env, const LmProvider& provider, RewardMode mode,
                          NidVariant variant, const std::vector<double>& w, int question_index,
                          uint64_t episode_seed) {
  Rng rng(episode_seed);
  EnvState state = env.reset(question_index);
  EpisodeRecord rec;

  while (!state.done) {
    CandidateSet cs = candidates_with_features(env, state);
    const std::vector<double> probs = action_probs(w, cs);
    const size_t chosen = rng.weighted(probs);
    rec.decisions.push_back(
        {cs.features, static_cast<int>(chosen), std::log(probs[chosen])});
    auto result = env.step(state, cs.actions[chosen]);
    state = std::move(result.state);
  }

  rec.trajectory = env.to_trajectory(state);
  const std::string& gold =
      env.world().questions[static_cast<size_t>(question_index)].gold_answer;
  rec.em = outcome_reward(rec.trajectory, gold);
  if (mode == RewardMode::Outcome) {
    rec.reward = rec.em;
  } else {
    rec.reward = score_trajectory(provider, rec.trajectory, gold, variant).total(mode);
  }
  rec.search_count = search_calls(rec.trajectory);
  rec.response_len = response_length(rec.trajectory);
  return rec;
}

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
  const size_t n = rewards.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);  // population variance
  // The floor only engages for near-constant groups; otherwise the group is
  // standardized exactly.
  const double std_floor = std::max(std::sqrt(var), 1e-8);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = (rewards[i] - mean) / std_floor;
  return out;
}

RolloutGroup sample_group(const Env& env, const LmProvider& provider, const TrainConfig& config,
                          const std::vector<double>& w, int question_index, uint64_t group_seed) {
  if (config.group_size < 2) throw std::invalid_argument("trainer: group size must be >= 2");

  RolloutGroup group;
  group.question_index = question_index;
  group.episodes.resize(static_cast<size_t>(config.group_size));

  std::vector<uint64_t> seeds(static_cast<size_t>(config.group_size));
  for (size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(group_seed, 0xE01D, i);

  if (config.parallel_rollouts) {
    std::vector<std::future<EpisodeRecord>> futures;
    futures.reserve(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        return run_episode(env, provider, config.mode, config.variant, w, question_index,
                           seeds[i]);
      }));
    }
    for (size_t i = 0; i < seeds.size(); ++i) group.episodes[i] = futures[i].get();
  } else {
    for (size_t i = 0; i < seeds.size(); ++i)
      group.episodes[i] =
          run_episode(env, provider, config.mode, config.variant, w, question_index, seeds[i]);
  }

  std::vector<double> rewards(group.episodes.size());
  for (size_t i = 0; i < group.episodes.size(); ++i) rewards[i] = group.episodes[i].reward;
  group.advantages = compute_advantages(rewards);
  return group;
}

namespace {

struct SurrogateEval {
  double objective = 0.0;
  std::vector<double> grad;
  double kl = 0.0;
  double clip_fraction = 0.0;
};

SurrogateEval eval_surrogate(const std::vector<double>& w, const std::vector<double>& w_ref,
                             const RolloutGroup& group, const TrainConfig& config,
                             bool want_grad) {
  if (group.episodes.size() != group.advantages.size())
    throw std::invalid_argument("trainer: group advantages not filled");

  SurrogateEval out;
  out.grad.assign(static_cast<size_t>(kFeatureDim), 0.0);
  long long n_actions = 0;
  long long n_clipped = 0;

  const double eps = config.clip_epsilon;
  const double beta = config.kl_beta;
  const double group_norm = 1.0 / static_cast<double>(group.episodes.size());

  for (size_t i = 0; i < group.episodes.size(); ++i) {
    const EpisodeRecord& ep = group.episodes[i];
    if (ep.decisions.empty()) continue;
    const double adv = group.advantages[i];
    const double weight = group_norm / static_cast<double>(ep.decisions.size());

    for (const DecisionRecord& dec : ep.decisions) {
      CandidateSet cs;
      cs.features = dec.features;
      const std::vector<double> probs = action_probs(w, cs);
      const std::vector<double> probs_ref = action_probs(w_ref, cs);
      const size_t a = static_cast<size_t>(dec.chosen);
      const double p = std::max(probs[a], 1e-300);
      const double logp = std::log(p);

      const double ratio = std::exp(logp - dec.logprob_old);
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;

      double term;
      double coeff;  // multiplies grad log pi_w(a)
      if (unclipped <= clipped) {
        term = unclipped;
        coeff = adv * ratio;
      } else {
        term = clipped;
        coeff = 0.0;
        ++n_clipped;
      }

      const double v = std::max(probs_ref[a], 1e-300) / p;
      const double kl_t = v - std::log(v) - 1.0;
      term -= beta * kl_t;
      coeff -= beta * (1.0 - v);

      out.objective += weight * term;
      out.kl += kl_t;
      ++n_actions;

      if (want_grad) {
        // grad log pi(a) = phi(a) - sum_j p_j phi(j)
        for (int d = 0; d < kFeatureDim; ++d) {
          double expected = 0.0;
          for (size_t j = 0; j < dec.features.size(); ++j)
            expected += probs[j] * dec.features[j][static_cast<size_t>(d)];
          out.grad[static_cast<size_t>(d)] +=
              weight * coeff * (dec.features[a][static_cast<size_t>(d)] - expected);
        }
      }
    }
  }

  if (n_actions > 0) {
    out.kl /= static_cast<double>(n_actions);
    out.clip_fraction = static_cast<double>(n_clipped) / static_cast<double>(n_actions);
  }
  return out;
}

}  // namespace

double grpo_objective(const std::vector<double>& w, const std::vector<double>& w_ref,
                      const RolloutGroup& group, const TrainConfig& config) {
  return eval_surrogate(w, w_ref, group, config, false).objective;
}

std::vector<double> grpo_gradient(const std::vector<double>& w, const std::vector<double>& w_ref,
                                  const RolloutGroup& group, const TrainConfig& config) {
  return eval_surrogate(w, w_ref, group, config, true).grad;
}

UpdateResult grpo_update(const std::vector<double>& w, const std::vector<double>& w_ref,
                         const RolloutGroup& group, const TrainConfig& config) {
  SurrogateEval eval = eval_surrogate(w, w_ref, group, config, true);

  UpdateResult result;
  result.diag.objective = eval.objective;
  result.diag.kl = eval.kl;
  result.diag.clip_fraction = eval.clip_fraction;

  for (double g : eval.grad) {
    if (!std::isfinite(g)) {
      result.w = w;
      result.diag.aborted = true;
      result.diag.abort_reason = "non-finite gradient";
      return result;
    }
  }

  result.w = w;
  for (size_t d = 0; d < result.w.size(); ++d)
    result.w[d] += config.learning_rate * eval.grad[d];
  return result;
}

std::string metrics_csv_header() { return "step,reward,resp_len,search_calls,kl,clip_frac"; }

std::string metrics_csv_row(const MetricsRow& row) {
  return std::to_string(row.step) + "," + fmt_double(row.reward) + "," +
         fmt_double(row.resp_len) + "," + fmt_double(row.search_calls) + "," +
         fmt_double(row.kl) + "," + fmt_double(row.clip_frac);
}

TrainResult train(const TrainConfig& config, const Env& env, const LmProvider& provider,
                  const std::string& out_dir) {
  if (config.steps < 1) throw std::invalid_argument("trainer: steps must be >= 1");

  std::vector<int> train_questions = env.world().split_indices("train");
  if (train_questions.empty())
    throw std::invalid_argument("trainer: world has no train questions");

  TrainResult result;
  result.w.assign(static_cast<size_t>(kFeatureDim), 0.0);
  const std::vector<double> w_ref = result.w;  // frozen reference = initial params

  std::ofstream csv;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    csv.open(out_dir + "/metrics.csv");
    if (!csv) throw std::runtime_error("trainer: cannot write " + out_dir + "/metrics.csv");
    csv << metrics_csv_header() << "\n";
    csv.flush();
  }

  Rng master(config.seed);
  for (int step = 1; step <= config.steps; ++step) {
    const int qi = train_questions[master.below(train_questions.size())];
    const uint64_t group_seed = derive_seed(config.seed, 0x6502, static_cast<uint64_t>(step));
    RolloutGroup group = sample_group(env, provider, config, result.w, qi, group_seed);

    UpdateDiagnostics diag;
    for (int epoch = 0; epoch < config.inner_epochs; ++epoch) {
      UpdateResult update = grpo_update(result.w, w_ref, group, config);
      diag = update.diag;
      if (update.diag.aborted) break;
      result.w = std::move(update.w);
    }

    MetricsRow row;
    row.step = step;
    for (const EpisodeRecord& ep : group.episodes) {
      row.reward += ep.reward;
      row.resp_len += static_cast<double>(ep.response_len);
      row.search_calls += static_cast<double>(ep.search_count);
    }
    const double g = static_cast<double>(group.episodes.size());
    row.reward /= g;
    row.resp_len /= g;
    row.search_calls /= g;
    row.kl = diag.kl;
    row.clip_frac = diag.clip_fraction;
    result.metrics.push_back(row);

    if (csv.is_open()) {
      csv << metrics_csv_row(row) << "\n";
      csv.flush();
    }
  }

  if (!out_dir.empty()) {
    Checkpoint ckpt;
    ckpt.w = result.w;
    ckpt.config = config;
    ckpt.step = config.steps;
    save_checkpoint(ckpt, out_dir + "/checkpoint.json");
  }
  return result;
}

namespace {

const char* variant_name(NidVariant v) {
  return v == NidVariant::PaperMinMin ? "paper_min_min" : "classic_max_max";
}

NidVariant variant_from_name(const std::string& name) {
  if (name == "paper_min_min") return NidVariant::PaperMinMin;
  if (name == "classic_max_max") return NidVariant::ClassicMaxMax;
  throw std::invalid_argument("trainer: unknown nid variant '" + name + "'");
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json j;
  j["feature_dim"] = ckpt.feature_dim;
  j["w"] = ckpt.w;
  j["config"] = {
      {"mode", reward_mode_name(ckpt.config.mode)},
      {"group_size", ckpt.config.group_size},
      {"learning_rate", ckpt.config.learning_rate},
      {"kl_beta", ckpt.config.kl_beta},
      {"clip_epsilon", ckpt.config.clip_epsilon},
      {"steps", ckpt.config.steps},
      {"seed", ckpt.config.seed},
      {"inner_epochs", ckpt.config.inner_epochs},
      {"parallel_rollouts", ckpt.config.parallel_rollouts},
      {"variant", variant_name(ckpt.config.variant)},
  };
  j["step"] = ckpt.step;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("trainer: cannot write checkpoint " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trainer: cannot open checkpoint " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Checkpoint ckpt;
  ckpt.feature_dim = j.at("feature_dim").get<int>();
  ckpt.w = j.at("w").get<std::vector<double>>();
  if (ckpt.feature_dim != static_cast<int>(ckpt.w.size()))
    throw std::runtime_error("trainer: checkpoint feature_dim does not match w length");
  const auto& cj = j.at("config");
  ckpt.config.mode = reward_mode_from_name(cj.at("mode").get<std::string>());
  ckpt.config.group_size = cj.at("group_size").get<int>();
  ckpt.config.learning_rate = cj.at("learning_rate").get<double>();
  ckpt.config.kl_beta = cj.at("kl_beta").get<double>();
  ckpt.config.clip_epsilon = cj.at("clip_epsilon").get<double>();
  ckpt.config.steps = cj.at("steps").get<int>();
  ckpt.config.seed = cj.at("seed").get<uint64_t>();
  ckpt.config.inner_epochs = cj.at("inner_epochs").get<int>();
  ckpt.config.parallel_rollouts = cj.at("parallel_rollouts").get<bool>();
  ckpt.config.variant = variant_from_name(cj.at("variant").get<std::string>());
  ckpt.step = j.at("step").get<int>();
  return ckpt;
}

}  // namespace birar
