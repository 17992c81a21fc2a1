#include "birar/merge.hpp"

#include <cstdio>
#include <stdexcept>

namespace birar {

std::vector<double> interpolate(const std::vector<double>& theta_forward,
                                const std::vector<double>& theta_backward, double lambda) {
  if (theta_forward.size() != theta_backward.size())
    throw std::invalid_argument("merge: checkpoint dimensions differ (" +
                                std::to_string(theta_forward.size()) + " vs " +
                                std::to_string(theta_backward.size()) + ")");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("merge: lambda must be in [0, 1]");
  if (lambda == 0.0) return theta_forward;
  if (lambda == 1.0) return theta_backward;
  std::vector<double> out(theta_forward.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - lambda) * theta_forward[i] + lambda * theta_backward[i];
  return out;
}

std::vector<SweepRow> sweep(const std::vector<double>& theta_forward,
                            const std::vector<double>& theta_backward,
                            const std::vector<double>& lambdas, const Env& env,
                            const std::vector<int>& question_indices,
                            const LmProvider& provider) {
  if (lambdas.empty()) throw std::invalid_argument("merge: empty lambda list");
  std::vector<SweepRow> rows;
  rows.reserve(lambdas.size());
  for (double lambda : lambdas) {
    const std::vector<double> theta = interpolate(theta_forward, theta_backward, lambda);
    const EvalReport report = evaluate(greedy_policy(theta), env, question_indices, provider,
                                       "merge", lambda);
    rows.push_back({lambda, report.mean.em, report.mean.response_length,
                    report.mean.search_calls});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::string out = "lambda,em,response_length,search_calls\n";
  for (const SweepRow& r : rows) {
    out += fmt(r.lambda) + "," + fmt(r.em) + "," + fmt(r.response_length) + "," +
           fmt(r.search_calls) + "\n";
  }
  return out;
}

}  // namespace birar
