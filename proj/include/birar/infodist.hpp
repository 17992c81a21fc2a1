#pragma once

#include "birar/lm_provider.hpp"
#include "birar/trajectory.hpp"

namespace birar {

// Non-negative normalized information distance. degenerate is set when both
// unconditional costs were below the denominator floor and 0 was returned.
struct Distance {
  double value = 0.0;
  bool degenerate = false;
};

// Numerator/denominator choice for the conditional NID ratio. PaperMinMin is
// min/min; ClassicMaxMax substitutes max in both positions.
enum class NidVariant { PaperMinMin, ClassicMaxMax };

inline constexpr double kDenominatorFloor = 1e-9;

// Conditional normalized information distance between a and b given context c:
//   min{K(a|b,c), K(b|a,c)} / min{K(a|c), K(b|c)}     (PaperMinMin)
// Symmetric in (a, b). Returns a flagged 0 when the denominator is below the
// floor.
Distance nid(const LmProvider& provider, const TokenSeq& a, const TokenSeq& b,
             const TokenSeq& c, NidVariant variant = NidVariant::PaperMinMin);

// Step-to-answer distance d(T_i, A | Q): how far step i's reasoning is from
// the final answer. i is 1-based.
Distance step_to_answer(const LmProvider& provider, const Trajectory& traj, size_t i,
                        NidVariant variant = NidVariant::PaperMinMin);

// Step-to-question distance d(T_i, Q | A): how grounded step i remains in the
// question. i is 1-based.
Distance step_to_question(const LmProvider& provider, const Trajectory& traj, size_t i,
                          NidVariant variant = NidVariant::PaperMinMin);

}  // namespace birar
