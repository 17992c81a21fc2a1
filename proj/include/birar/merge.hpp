#pragma once

#include "birar/evalreport.hpp"

#include <string>
#include <vector>

namespace birar {

struct MergeSpec {
  std::string forward_path;
  std::string backward_path;
  double lambda = 0.25;  // interpolation weight on the backward model
};

// The paper's three interior lambda values plus the endpoints as anchors.
inline const std::vector<double> kDefaultLambdaGrid = {0.0, 0.25, 0.5, 0.75, 1.0};

// theta = (1 - lambda) * theta_forward + lambda * theta_backward, elementwise.
// lambda = 0 and lambda = 1 return the endpoints bit-exactly.
std::vector<double> interpolate(const std::vector<double>& theta_forward,
                                const std::vector<double>& theta_backward, double lambda);

struct SweepRow {
  double lambda = 0.0;
  double em = 0.0;
  double response_length = 0.0;
  double search_calls = 0.0;
};

// Evaluates each interpolated policy greedily on the question set.
std::vector<SweepRow> sweep(const std::vector<double>& theta_forward,
                            const std::vector<double>& theta_backward,
                            const std::vector<double>& lambdas, const Env& env,
                            const std::vector<int>& question_indices,
                            const LmProvider& provider);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace birar
