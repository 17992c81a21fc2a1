#include "birar/evalreport.hpp"

#include "birar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace birar {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string world_identity(const Env& env) {
  return "seed" + std::to_string(env.world().seed) + "-q" +
         std::to_string(env.world().questions.size());
}

}  // namespace

PolicyFn greedy_policy(std::vector<double> w) {
  return [w = std::move(w)](const EnvState&, const CandidateSet& cs) -> size_t {
    const std::vector<double> probs = action_probs(w, cs);
    size_t best = 0;
    for (size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    return best;
  };
}

PolicyFn oracle_policy(const Env& env) {
  return [&env](const EnvState& state, const CandidateSet& cs) -> size_t {
    const auto plan = env.oracle_plan(state.question_index);
    const size_t pos = static_cast<size_t>(state.step_index);
    const Action target = pos < plan.size() ? plan[pos] : plan.back();
    const auto it = std::find(cs.actions.begin(), cs.actions.end(), target);
    if (it == cs.actions.end())
      throw std::runtime_error("evalreport: oracle action not available");
    return static_cast<size_t>(it - cs.actions.begin());
  };
}

PolicyFn uniform_random_policy(uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const EnvState&, const CandidateSet& cs) -> size_t {
    return static_cast<size_t>(rng->below(cs.actions.size()));
  };
}

EvalAggregates aggregate_rows(const std::vector<EvalRow>& rows) {
  EvalAggregates agg;
  if (rows.empty()) return agg;
  for (const EvalRow& r : rows) {
    agg.em += r.em;
    agg.response_length += static_cast<double>(r.response_length);
    agg.search_calls += static_cast<double>(r.search_calls);
    agg.r_forward += r.r_forward;
    agg.r_backward += r.r_backward;
  }
  const double n = static_cast<double>(rows.size());
  agg.em /= n;
  agg.response_length /= n;
  agg.search_calls /= n;
  agg.r_forward /= n;
  agg.r_backward /= n;
  return agg;
}

EvalReport evaluate(const PolicyFn& policy, const Env& env,
                    const std::vector<int>& question_indices, const LmProvider& provider,
                    std::string mode, double lambda, uint64_t seed,
                    std::string question_set_id) {
  EvalReport report;
  report.mode = std::move(mode);
  report.lambda = lambda;
  report.seed = seed;
  report.world_id = world_identity(env);
  report.question_set_id = question_set_id.empty()
                               ? "n" + std::to_string(question_indices.size())
                               : std::move(question_set_id);

  for (int qi : question_indices) {
    if (qi < 0 || qi >= static_cast<int>(env.world().questions.size()))
      throw std::invalid_argument("evalreport: question index outside the world");
    EnvState state = env.reset(qi);
    while (!state.done) {
      CandidateSet cs = candidates_with_features(env, state);
      const size_t chosen = policy(state, cs);
      if (chosen >= cs.actions.size())
        throw std::invalid_argument("evalreport: policy chose an out-of-range action");
      auto result = env.step(state, cs.actions[chosen]);
      state = std::move(result.state);
    }
    const Trajectory traj = env.to_trajectory(state);
    const WorldQuestion& q = env.world().questions[static_cast<size_t>(qi)];
    const RewardBreakdown breakdown = score_trajectory(provider, traj, q.gold_answer);

    EvalRow row;
    row.question_id = q.id;
    row.em = breakdown.r_outcome;
    row.response_length = response_length(traj);
    row.search_calls = search_calls(traj);
    row.r_forward = breakdown.r_forward;
    row.r_backward = breakdown.r_backward;
    report.rows.push_back(std::move(row));
  }
  report.mean = aggregate_rows(report.rows);
  return report;
}

Comparison compare(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("evalreport: nothing to compare");
  Comparison cmp;
  cmp.world_id = reports.front().world_id;
  cmp.question_set_id = reports.front().question_set_id;
  for (const EvalReport& r : reports) {
    if (r.world_id != cmp.world_id || r.question_set_id != cmp.question_set_id)
      throw std::invalid_argument("evalreport: reports cover different worlds or question sets");
    cmp.labels.push_back(r.mode.empty() ? "run" + std::to_string(cmp.labels.size()) : r.mode);
    cmp.aggregates.push_back(r.mean);
  }
  const EvalAggregates& base = cmp.aggregates.front();
  for (const EvalAggregates& a : cmp.aggregates) {
    EvalAggregates d;
    d.em = a.em - base.em;
    d.response_length = a.response_length - base.response_length;
    d.search_calls = a.search_calls - base.search_calls;
    d.r_forward = a.r_forward - base.r_forward;
    d.r_backward = a.r_backward - base.r_backward;
    cmp.deltas.push_back(d);
  }
  return cmp;
}

namespace {

nlohmann::json aggregates_json(const EvalAggregates& a) {
  return {{"em", a.em},
          {"response_length", a.response_length},
          {"search_calls", a.search_calls},
          {"r_forward", a.r_forward},
          {"r_backward", a.r_backward}};
}

}  // namespace

void emit_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("evalreport: cannot write " + path);
  out << "question_id,em,response_length,search_calls,r_forward,r_backward\n";
  for (const EvalRow& r : report.rows) {
    out << r.question_id << "," << fmt_double(r.em) << "," << r.response_length << ","
        << r.search_calls << "," << fmt_double(r.r_forward) << "," << fmt_double(r.r_backward)
        << "\n";
  }
}

std::vector<EvalRow> read_report_rows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("evalreport: cannot open " + path);
  std::vector<EvalRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    EvalRow row;
    std::getline(ss, row.question_id, ',');
    std::getline(ss, field, ',');
    row.em = std::stod(field);
    std::getline(ss, field, ',');
    row.response_length = std::stoi(field);
    std::getline(ss, field, ',');
    row.search_calls = std::stoi(field);
    std::getline(ss, field, ',');
    row.r_forward = std::stod(field);
    std::getline(ss, field, ',');
    row.r_backward = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_report_json(const EvalReport& report, const std::string& path) {
  nlohmann::json j;
  j["mode"] = report.mode;
  j["lambda"] = report.lambda;
  j["seed"] = report.seed;
  j["world_id"] = report.world_id;
  j["question_set_id"] = report.question_set_id;
  j["mean"] = aggregates_json(report.mean);
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& r : report.rows) {
    rows.push_back({{"question_id", r.question_id},
                    {"em", r.em},
                    {"response_length", r.response_length},
                    {"search_calls", r.search_calls},
                    {"r_forward", r.r_forward},
                    {"r_backward", r.r_backward}});
  }
  j["rows"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("evalreport: cannot write " + path);
  out << j.dump(2) << "\n";
}

void emit_comparison_csv(const Comparison& cmp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("evalreport: cannot write " + path);
  out << "label,em,response_length,search_calls,r_forward,r_backward,"
         "d_em,d_response_length,d_search_calls,d_r_forward,d_r_backward\n";
  for (size_t i = 0; i < cmp.labels.size(); ++i) {
    const EvalAggregates& a = cmp.aggregates[i];
    const EvalAggregates& d = cmp.deltas[i];
    out << cmp.labels[i] << "," << fmt_double(a.em) << "," << fmt_double(a.response_length)
        << "," << fmt_double(a.search_calls) << "," << fmt_double(a.r_forward) << ","
        << fmt_double(a.r_backward) << "," << fmt_double(d.em) << ","
        << fmt_double(d.response_length) << "," << fmt_double(d.search_calls) << ","
        << fmt_double(d.r_forward) << "," << fmt_double(d.r_backward) << "\n";
  }
}

void emit_comparison_json(const Comparison& cmp, const std::string& path) {
  nlohmann::json j;
  j["world_id"] = cmp.world_id;
  j["question_set_id"] = cmp.question_set_id;
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < cmp.labels.size(); ++i) {
    rows.push_back({{"label", cmp.labels[i]},
                    {"aggregates", aggregates_json(cmp.aggregates[i])},
                    {"delta_vs_first", aggregates_json(cmp.deltas[i])}});
  }
  j["rows"] = std::move(rows);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("evalreport: cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_metric_plot_svg(const std::vector<MetricsRow>& metrics, const std::string& metric,
                           const std::string& path) {
  if (metrics.empty()) throw std::invalid_argument("evalreport: no metrics to plot");

  auto value_of = [&](const MetricsRow& row) -> double {
    if (metric == "reward") return row.reward;
    if (metric == "resp_len") return row.resp_len;
    if (metric == "search_calls") return row.search_calls;
    if (metric == "kl") return row.kl;
    if (metric == "clip_frac") return row.clip_frac;
    throw std::invalid_argument("evalreport: unknown metric '" + metric + "'");
  };

  double lo = value_of(metrics.front());
  double hi = lo;
  for (const MetricsRow& row : metrics) {
    lo = std::min(lo, value_of(row));
    hi = std::max(hi, value_of(row));
  }
  if (hi == lo) hi = lo + 1.0;

  const double width = 640.0, height = 360.0, margin = 48.0;
  const double x0 = margin, x1 = width - margin, y0 = height - margin, y1 = margin;
  const int min_step = metrics.front().step;
  const int max_step = metrics.back().step;
  const double step_span = std::max(1, max_step - min_step);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("evalreport: cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n";
  out << "  <text x=\"" << (width / 2) << "\" y=\"" << (height - 10)
      << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  out << "  <text x=\"14\" y=\"" << (height / 2) << "\" text-anchor=\"middle\" font-size=\"12\""
      << " transform=\"rotate(-90 14 " << (height / 2) << ")\">" << metric << "</text>\n";
  out << "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < metrics.size(); ++i) {
    const double fx = (static_cast<double>(metrics[i].step - min_step)) / step_span;
    const double fy = (value_of(metrics[i]) - lo) / (hi - lo);
    const double px = x0 + fx * (x1 - x0);
    const double py = y0 - fy * (y0 - y1);
    if (i) out << " ";
    out << fmt_double(px) << "," << fmt_double(py);
  }
  out << "\"/>\n";
  out << "</svg>\n";
}

}  // namespace birar
