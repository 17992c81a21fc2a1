#pragma once

#include "birar/trainer.hpp"

#include <functional>
#include <string>
#include <vector>

namespace birar {

struct EvalRow {
  std::string question_id;
  double em = 0.0;
  int response_length = 0;
  int search_calls = 0;
  double r_forward = 0.0;
  double r_backward = 0.0;
};

struct EvalAggregates {
  double em = 0.0;
  double response_length = 0.0;
  double search_calls = 0.0;
  double r_forward = 0.0;
  double r_backward = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalAggregates mean;
  // run metadata
  std::string mode;
  double lambda = -1.0;  // < 0 when not a merged policy
  uint64_t seed = 0;
  std::string world_id;
  std::string question_set_id;
};

// Picks an action index given the state and its candidates.
using PolicyFn = std::function<size_t(const EnvState&, const CandidateSet&)>;

PolicyFn greedy_policy(std::vector<double> w);
PolicyFn oracle_policy(const Env& env);
// Samples uniformly over candidates; used for the random baseline.
PolicyFn uniform_random_policy(uint64_t seed);

EvalAggregates aggregate_rows(const std::vector<EvalRow>& rows);

// Runs one episode per question and scores it in both directions. Evaluation
// policies are deterministic functions of the state (greedy decoding), so the
// report is reproducible.
EvalReport evaluate(const PolicyFn& policy, const Env& env,
                    const std::vector<int>& question_indices, const LmProvider& provider,
                    std::string mode = "", double lambda = -1.0, uint64_t seed = 0,
                    std::string question_set_id = "");

struct Comparison {
  std::vector<std::string> labels;
  std::vector<EvalAggregates> aggregates;
  std::vector<EvalAggregates> deltas;  // vs the first report
  std::string world_id;
  std::string question_set_id;
};

// All reports must share world and question set.
Comparison compare(const std::vector<EvalReport>& reports);

void emit_report_csv(const EvalReport& report, const std::string& path);
void emit_report_json(const EvalReport& report, const std::string& path);
std::vector<EvalRow> read_report_rows_csv(const std::string& path);

void emit_comparison_csv(const Comparison& cmp, const std::string& path);
void emit_comparison_json(const Comparison& cmp, const std::string& path);

// Standalone SVG line plot of one metrics column against the training step;
// every logged step appears exactly once.
void write_metric_plot_svg(const std::vector<MetricsRow>& metrics, const std::string& metric,
                           const std::string& path);

}  // namespace birar
