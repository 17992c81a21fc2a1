#include "birar/json_io.hpp"

namespace birar {

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json steps = nlohmann::json::array();
  for (const Step& s : traj.steps) {
    nlohmann::json retrieved = nlohmann::json::array();
    for (const Passage& p : s.retrieved)
      retrieved.push_back({{"doc_id", p.doc_id}, {"text", p.text}});
    nlohmann::json sj = {{"think", s.think}, {"retrieved", std::move(retrieved)}};
    if (s.search_query.has_value())
      sj["search_query"] = *s.search_query;
    else
      sj["search_query"] = nullptr;
    steps.push_back(std::move(sj));
  }
  nlohmann::json j = {{"question", traj.question},
                      {"steps", std::move(steps)},
                      {"raw_text", traj.raw_text}};
  if (traj.answer.has_value())
    j["answer"] = *traj.answer;
  else
    j["answer"] = nullptr;
  return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("trajectory: JSON body must be an object");
  Trajectory traj;
  traj.question = j.value("question", std::string{});
  traj.raw_text = j.value("raw_text", std::string{});
  if (j.contains("answer") && !j["answer"].is_null())
    traj.answer = j["answer"].get<std::string>();
  if (j.contains("steps")) {
    if (!j["steps"].is_array())
      throw std::invalid_argument("trajectory: steps must be an array");
    for (const auto& sj : j["steps"]) {
      Step s;
      s.think = sj.value("think", std::string{});
      if (sj.contains("search_query") && !sj["search_query"].is_null())
        s.search_query = sj["search_query"].get<std::string>();
      if (sj.contains("retrieved")) {
        for (const auto& pj : sj["retrieved"])
          s.retrieved.push_back(
              {pj.value("doc_id", std::string{}), pj.value("text", std::string{})});
      }
      if (!s.retrieved.empty() && !s.search_query.has_value())
        throw std::invalid_argument(
            "trajectory: step has retrieved passages but no search_query");
      traj.steps.push_back(std::move(s));
    }
  }
  return traj;
}

nlohmann::json breakdown_to_json(const RewardBreakdown& b) {
  return {{"d_t_a", b.d_t_a},
          {"d_t_q", b.d_t_q},
          {"d_t_a_degenerate", b.d_t_a_degenerate},
          {"d_t_q_degenerate", b.d_t_q_degenerate},
          {"r_t_a", b.r_t_a},
          {"r_t_q", b.r_t_q},
          {"correct", b.correct},
          {"r_forward", b.r_forward},
          {"r_backward", b.r_backward},
          {"r_outcome", b.r_outcome}};
}

}  // namespace birar
