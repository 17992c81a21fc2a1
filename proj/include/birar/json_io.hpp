#pragma once

#include "birar/rewards.hpp"
#include "birar/trajectory.hpp"

#include "json.hpp"

namespace birar {

// Trajectory file format:
//   {question, steps: [{think, search_query, retrieved: [{doc_id, text}]}],
//    answer, raw_text}
// search_query and answer are null when absent.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

nlohmann::json breakdown_to_json(const RewardBreakdown& breakdown);

}  // namespace birar
