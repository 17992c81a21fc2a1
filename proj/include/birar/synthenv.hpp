#pragma once

#include "birar/retrieval.hpp"
#include "birar/trajectory.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace birar {

struct WorldParams {
  int n_entities = 40;
  int n_relations = 6;
  int n_questions = 300;
  int n_eval_questions = 100;                       // last questions form the eval split
  std::array<double, 3> hop_depth_mix = {0.50, 0.35, 0.15};
  int distractors_per_doc = 2;
  double fact_density = 0.7;                        // P(fact exists per entity-relation pair)
  int max_steps = 4;
  int top_k = 3;
  friend bool operator==(const WorldParams&, const WorldParams&) = default;
};

// (subject, relation, object) as indices into entities/relations. At most one
// object per (subject, relation), so chains are unambiguous.
struct Fact {
  int subject;
  int relation;
  int object;
  friend bool operator==(const Fact&, const Fact&) = default;
};

struct WorldQuestion {
  std::string id;
  std::string text;
  std::string gold_answer;
  int hop_depth;
  std::vector<int> gold_chain;  // fact indices, in application order
  std::string split;            // "train" | "eval"
  bool oracle_ok = false;       // solvability certificate from the oracle run
  friend bool operator==(const WorldQuestion&, const WorldQuestion&) = default;
};

// A seeded multi-hop QA world: entity-relation facts, a one-fact-per-document
// corpus with distractor sentences, and questions with gold chains. A pure
// function of (seed, params).
struct World {
  uint64_t seed = 0;
  WorldParams params;
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::vector<Fact> facts;
  Corpus corpus;
  std::vector<WorldQuestion> questions;

  std::vector<int> split_indices(const std::string& split) const;
};

World generate_world(uint64_t seed, const WorldParams& params = {});

void save_world(const World& world, const std::string& dir);
World load_world(const std::string& dir);

struct Action {
  enum class Type { Search, Answer };
  Type type = Type::Answer;
  int entity = -1;
  int relation = -1;  // only for Search
  friend bool operator==(const Action&, const Action&) = default;
};

struct EnvState {
  int question_index = -1;
  int step_index = 0;
  bool done = false;
  std::optional<int> answered_entity;

  std::vector<int> known_entities;   // discovery order; starts with the question entity
  std::vector<int> known_relations;  // question relations in usage order, then discovered
  std::vector<std::pair<int, int>> searched_pairs;
  std::vector<Fact> matched_facts;        // fact sentences recognized in observations
  std::vector<int> last_observation_objects;  // objects matched in the most recent observation

  struct HistoryItem {
    Action action;
    std::vector<Passage> observation;
  };
  std::vector<HistoryItem> history;
};

// Where the episode stands along the question's relation chain, reconstructed
// from matched facts only (never from the gold chain).
struct ChainView {
  int progress = 0;          // how many chain relations have been resolved
  int frontier_entity = -1;  // current chain head
  int next_relation = -1;    // -1 once complete
  bool complete = false;
};

// Episodic environment over a world: search actions query the BM25 index over
// the world corpus; answer actions terminate. Immutable and shareable across
// concurrent episodes.
class Env {
 public:
  explicit Env(const World& world);

  const World& world() const { return *world_; }
  const Bm25Index& index() const { return index_; }

  EnvState reset(int question_index) const;
  std::vector<Action> candidate_actions(const EnvState& state) const;

  struct StepResult {
    std::vector<Passage> observation;
    EnvState state;
  };
  StepResult step(const EnvState& state, const Action& action) const;

  ChainView chain_view(const EnvState& state) const;

  // Renders a finished episode into the tagged trajectory format.
  Trajectory to_trajectory(const EnvState& final_state) const;

  // Gold-chain action sequence for the question; used for the solvability
  // certificate and the oracle policy.
  std::vector<Action> oracle_plan(int question_index) const;

  std::string search_query_text(const Action& action) const;

 private:
  const World* world_;
  Bm25Index index_;
  std::unordered_map<std::string, int> entity_by_name_;
  std::unordered_map<std::string, int> relation_by_name_;
  std::unordered_map<std::string, size_t> doc_pos_;

  void absorb_observation(EnvState& state, const std::vector<Passage>& passages) const;
};

}  // namespace birar
