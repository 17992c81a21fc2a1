#include "birar/infodist.hpp"

#include <algorithm>

namespace birar {

Distance nid(const LmProvider& provider, const TokenSeq& a, const TokenSeq& b, const TokenSeq& c,
             NidVariant variant) {
  const BitCost a_given_bc = provider.cond_bits_joint(a, b, c);
  const BitCost b_given_ac = provider.cond_bits_joint(b, a, c);
  const BitCost a_given_c = provider.cond_bits(a, c);
  const BitCost b_given_c = provider.cond_bits(b, c);

  double num, den;
  if (variant == NidVariant::PaperMinMin) {
    num = std::min(a_given_bc, b_given_ac);
    den = std::min(a_given_c, b_given_c);
  } else {
    num = std::max(a_given_bc, b_given_ac);
    den = std::max(a_given_c, b_given_c);
  }
  if (den < kDenominatorFloor) return {0.0, true};
  return {num / den, false};
}

namespace {

const std::string& required_answer(const Trajectory& traj) {
  if (!traj.answer.has_value())
    throw std::invalid_argument("infodist: trajectory has no final answer");
  return *traj.answer;
}

}  // namespace

Distance step_to_answer(const LmProvider& provider, const Trajectory& traj, size_t i,
                        NidVariant variant) {
  const std::string& answer = required_answer(traj);
  return nid(provider, tokenize(step_text(traj, i)), tokenize(answer), tokenize(traj.question),
             variant);
}

Distance step_to_question(const LmProvider& provider, const Trajectory& traj, size_t i,
                          NidVariant variant) {
  const std::string& answer = required_answer(traj);
  return nid(provider, tokenize(step_text(traj, i)), tokenize(traj.question), tokenize(answer),
             variant);
}

}  // namespace birar
