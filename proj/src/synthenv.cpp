#include "birar/synthenv.hpp"

#include "birar/rng.hpp"
#include "birar/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace birar {

namespace {

const std::vector<std::string>& relation_pool() {
  static const std::vector<std::string> pool = {
      "mentor", "capital", "founder", "leader", "origin", "rival",  "patron", "anchor",
      "emblem", "keeper",  "herald",  "warden", "envoy",  "crest",  "root",   "signet"};
  return pool;
}

const std::vector<std::string>& distractor_verbs() {
  static const std::vector<std::string> verbs = {"praised", "visited", "admired", "taught",
                                                 "rivaled"};
  return verbs;
}

const std::set<std::string>& reserved_words() {
  static const std::set<std::string> words = {
      "what", "is",    "the",    "of",   "i",    "should", "look",    "up",      "answer",
      "locals", "recall", "that", "once", "next", "praised", "visited", "admired", "taught",
      "rivaled"};
  return words;
}

std::string make_entity_name(Rng& rng) {
  static const std::vector<std::string> heads = {"ba", "den", "kor", "lim", "mor", "nev",
                                                 "pol", "ras", "sul", "tor", "vel", "zan"};
  static const std::vector<std::string> tails = {"dor", "fin", "gar", "hal", "jun", "kel",
                                                 "lor", "mir", "nat", "rud", "sem", "vik"};
  return heads[rng.below(heads.size())] + tails[rng.below(tails.size())];
}

std::string zero_pad(size_t value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

std::string question_text(const std::vector<std::string>& relations,
                          const std::vector<int>& chain, const std::string& start_entity) {
  // chain is in usage order (innermost first); text nests outermost first.
  std::string text = "What is";
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    text += " the " + relations[static_cast<size_t>(*it)] + " of";
  }
  text += " " + start_entity + "?";
  return text;
}

void validate_params(const WorldParams& p) {
  const auto fail = [](const std::string& msg) {
    throw std::invalid_argument("synthenv: " + msg);
  };
  if (p.n_entities < 2) fail("n_entities must be >= 2");
  if (p.n_relations < 1) fail("n_relations must be >= 1");
  if (p.n_questions < 1) fail("n_questions must be >= 1");
  if (p.n_eval_questions < 0 || p.n_eval_questions >= p.n_questions)
    fail("n_eval_questions must be in [0, n_questions)");
  double mix_sum = 0.0;
  for (double m : p.hop_depth_mix) {
    if (m < 0.0) fail("hop_depth_mix entries must be >= 0");
    mix_sum += m;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9) fail("hop_depth_mix must sum to 1");
  if (p.distractors_per_doc < 0) fail("distractors_per_doc must be >= 0");
  if (!(p.fact_density > 0.0 && p.fact_density <= 1.0)) fail("fact_density must be in (0, 1]");
  if (p.max_steps < 2) fail("max_steps must be >= 2");
  if (p.top_k < 1) fail("top_k must be >= 1");
}

}  // namespace

std::vector<int> World::split_indices(const std::string& split) const {
  std::vector<int> out;
  for (size_t i = 0; i < questions.size(); ++i)
    if (questions[i].split == split) out.push_back(static_cast<int>(i));
  return out;
}

World generate_world(uint64_t seed, const WorldParams& params) {
  validate_params(params);

  World world;
  world.seed = seed;
  world.params = params;
  Rng rng(derive_seed(seed, 0xB17A5));

  // Entity and relation names. Entities are synthetic two-syllable words kept
  // disjoint from relation names and template vocabulary.
  const auto& pool = relation_pool();
  for (int r = 0; r < params.n_relations; ++r) {
    if (static_cast<size_t>(r) < pool.size())
      world.relations.push_back(pool[static_cast<size_t>(r)]);
    else
      world.relations.push_back("rel" + std::to_string(r));
  }
  std::set<std::string> taken(world.relations.begin(), world.relations.end());
  for (const auto& w : reserved_words()) taken.insert(w);
  while (static_cast<int>(world.entities.size()) < params.n_entities) {
    std::string name = make_entity_name(rng);
    if (taken.insert(name).second) world.entities.push_back(name);
  }

  // Facts: at most one object per (subject, relation).
  for (int r = 0; r < params.n_relations; ++r) {
    for (int s = 0; s < params.n_entities; ++s) {
      if (rng.real01() >= params.fact_density) continue;
      int obj = static_cast<int>(rng.below(static_cast<uint64_t>(params.n_entities - 1)));
      if (obj >= s) ++obj;  // avoid self-loops
      world.facts.push_back({s, r, obj});
    }
  }
  if (world.facts.empty())
    throw std::invalid_argument("synthenv: infeasible params (no facts generated)");

  // One document per fact plus distractor sentences.
  const auto& verbs = distractor_verbs();
  for (size_t f = 0; f < world.facts.size(); ++f) {
    const Fact& fact = world.facts[f];
    Document doc;
    doc.id = "f" + zero_pad(f, 4);
    doc.title = world.entities[static_cast<size_t>(fact.subject)] + " " +
                world.relations[static_cast<size_t>(fact.relation)];
    std::string text = "The " + world.relations[static_cast<size_t>(fact.relation)] + " of " +
                       world.entities[static_cast<size_t>(fact.subject)] + " is " +
                       world.entities[static_cast<size_t>(fact.object)] + ".";
    for (int d = 0; d < params.distractors_per_doc; ++d) {
      const auto e1 = rng.below(static_cast<uint64_t>(params.n_entities));
      const auto e2 = rng.below(static_cast<uint64_t>(params.n_entities));
      const auto& verb = verbs[rng.below(verbs.size())];
      text += " Locals recall that " + world.entities[e1] + " once " + verb + " " +
              world.entities[e2] + ".";
    }
    doc.text = std::move(text);
    world.corpus.documents.push_back(std::move(doc));
  }

  // Lookup for chain sampling.
  std::unordered_map<long long, int> fact_by_subject_relation;
  for (size_t f = 0; f < world.facts.size(); ++f) {
    const Fact& fact = world.facts[f];
    fact_by_subject_relation[static_cast<long long>(fact.subject) * params.n_relations +
                             fact.relation] = static_cast<int>(f);
  }

  // Questions are accepted only after the oracle plan solves them through the
  // actual environment, so every stored question carries its certificate.
  Env env(world);
  std::set<std::string> seen_texts;
  long long attempts = 200ll * params.n_questions;
  while (static_cast<int>(world.questions.size()) < params.n_questions && attempts-- > 0) {
    const std::vector<double> mix(params.hop_depth_mix.begin(), params.hop_depth_mix.end());
    const int depth = static_cast<int>(rng.weighted(mix)) + 1;
    int x = static_cast<int>(rng.below(static_cast<uint64_t>(params.n_entities)));

    std::vector<int> chain_relations;
    std::vector<int> chain_facts;
    bool ok = true;
    int cur = x;
    for (int hop = 0; hop < depth; ++hop) {
      std::vector<int> options;
      for (int r = 0; r < params.n_relations; ++r) {
        if (std::find(chain_relations.begin(), chain_relations.end(), r) !=
            chain_relations.end())
          continue;
        auto it = fact_by_subject_relation.find(
            static_cast<long long>(cur) * params.n_relations + r);
        if (it != fact_by_subject_relation.end()) options.push_back(r);
      }
      if (options.empty()) {
        ok = false;
        break;
      }
      const int r = options[rng.below(options.size())];
      const int f = fact_by_subject_relation.at(static_cast<long long>(cur) * params.n_relations + r);
      chain_relations.push_back(r);
      chain_facts.push_back(f);
      cur = world.facts[static_cast<size_t>(f)].object;
    }
    if (!ok) continue;

    WorldQuestion q;
    q.text = question_text(world.relations, chain_relations, world.entities[static_cast<size_t>(x)]);
    if (!seen_texts.insert(q.text).second) continue;
    q.id = "q" + zero_pad(world.questions.size(), 3);
    q.gold_answer = world.entities[static_cast<size_t>(cur)];
    q.hop_depth = depth;
    q.gold_chain = chain_facts;
    q.split = static_cast<int>(world.questions.size()) <
                      params.n_questions - params.n_eval_questions
                  ? "train"
                  : "eval";

    world.questions.push_back(q);
    const int qi = static_cast<int>(world.questions.size()) - 1;
    bool solved = false;
    try {
      EnvState state = env.reset(qi);
      for (const Action& action : env.oracle_plan(qi)) {
        auto result = env.step(state, action);
        state = std::move(result.state);
      }
      solved = state.done && state.answered_entity.has_value() &&
               world.entities[static_cast<size_t>(*state.answered_entity)] == q.gold_answer;
    } catch (const std::exception&) {
      solved = false;
    }
    if (!solved) {
      seen_texts.erase(q.text);
      world.questions.pop_back();
      continue;
    }
    world.questions.back().oracle_ok = true;
  }

  if (static_cast<int>(world.questions.size()) < params.n_questions)
    throw std::invalid_argument(
        "synthenv: infeasible params (could not derive enough solvable questions)");
  return world;
}

// ---------------------------------------------------------------------------
// World persistence

void save_world(const World& world, const std::string& dir) {
  std::filesystem::create_directories(dir);

  nlohmann::json wj;
  wj["seed"] = world.seed;
  wj["params"] = {
      {"n_entities", world.params.n_entities},
      {"n_relations", world.params.n_relations},
      {"n_questions", world.params.n_questions},
      {"n_eval_questions", world.params.n_eval_questions},
      {"hop_depth_mix", world.params.hop_depth_mix},
      {"distractors_per_doc", world.params.distractors_per_doc},
      {"fact_density", world.params.fact_density},
      {"max_steps", world.params.max_steps},
      {"top_k", world.params.top_k},
  };
  wj["entities"] = world.entities;
  wj["relations"] = world.relations;
  nlohmann::json facts = nlohmann::json::array();
  for (const Fact& f : world.facts) facts.push_back({f.subject, f.relation, f.object});
  wj["facts"] = std::move(facts);

  std::ofstream wout(dir + "/world.json");
  if (!wout) throw std::runtime_error("synthenv: cannot write " + dir + "/world.json");
  wout << wj.dump(2) << "\n";

  save_corpus_jsonl(world.corpus, dir + "/corpus.jsonl");

  std::ofstream qout(dir + "/questions.jsonl");
  if (!qout) throw std::runtime_error("synthenv: cannot write " + dir + "/questions.jsonl");
  for (const auto& q : world.questions) {
    nlohmann::json qj = {
        {"id", q.id},           {"text", q.text},
        {"gold_answer", q.gold_answer}, {"hop_depth", q.hop_depth},
        {"gold_chain", q.gold_chain},   {"split", q.split},
        {"oracle_ok", q.oracle_ok},
    };
    qout << qj.dump() << "\n";
  }
}

World load_world(const std::string& dir) {
  std::ifstream win(dir + "/world.json");
  if (!win) throw std::runtime_error("synthenv: cannot open " + dir + "/world.json");
  nlohmann::json wj = nlohmann::json::parse(win);

  World world;
  world.seed = wj.at("seed").get<uint64_t>();
  const auto& pj = wj.at("params");
  world.params.n_entities = pj.at("n_entities").get<int>();
  world.params.n_relations = pj.at("n_relations").get<int>();
  world.params.n_questions = pj.at("n_questions").get<int>();
  world.params.n_eval_questions = pj.at("n_eval_questions").get<int>();
  world.params.hop_depth_mix = pj.at("hop_depth_mix").get<std::array<double, 3>>();
  world.params.distractors_per_doc = pj.at("distractors_per_doc").get<int>();
  world.params.fact_density = pj.at("fact_density").get<double>();
  world.params.max_steps = pj.at("max_steps").get<int>();
  world.params.top_k = pj.at("top_k").get<int>();
  world.entities = wj.at("entities").get<std::vector<std::string>>();
  world.relations = wj.at("relations").get<std::vector<std::string>>();
  for (const auto& fj : wj.at("facts"))
    world.facts.push_back({fj.at(0).get<int>(), fj.at(1).get<int>(), fj.at(2).get<int>()});

  world.corpus = load_corpus_jsonl(dir + "/corpus.jsonl");

  std::ifstream qin(dir + "/questions.jsonl");
  if (!qin) throw std::runtime_error("synthenv: cannot open " + dir + "/questions.jsonl");
  std::string line;
  while (std::getline(qin, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json qj = nlohmann::json::parse(line);
    WorldQuestion q;
    q.id = qj.at("id").get<std::string>();
    q.text = qj.at("text").get<std::string>();
    q.gold_answer = qj.at("gold_answer").get<std::string>();
    q.hop_depth = qj.at("hop_depth").get<int>();
    q.gold_chain = qj.at("gold_chain").get<std::vector<int>>();
    q.split = qj.at("split").get<std::string>();
    q.oracle_ok = qj.at("oracle_ok").get<bool>();
    world.questions.push_back(std::move(q));
  }
  return world;
}

// ---------------------------------------------------------------------------
// Env

Env::Env(const World& world) : world_(&world), index_(Bm25Index::build(world.corpus)) {
  for (size_t i = 0; i < world.entities.size(); ++i)
    entity_by_name_[world.entities[i]] = static_cast<int>(i);
  for (size_t i = 0; i < world.relations.size(); ++i)
    relation_by_name_[world.relations[i]] = static_cast<int>(i);
  for (size_t i = 0; i < world.corpus.documents.size(); ++i)
    doc_pos_[world.corpus.documents[i].id] = i;
}

EnvState Env::reset(int question_index) const {
  if (question_index < 0 || question_index >= static_cast<int>(world_->questions.size()))
    throw std::out_of_range("synthenv: question index out of range");

  EnvState state;
  state.question_index = question_index;

  const TokenSeq tokens = tokenize(world_->questions[static_cast<size_t>(question_index)].text);
  int start_entity = -1;
  std::vector<int> relations_in_text_order;
  for (const auto& tok : tokens) {
    auto rit = relation_by_name_.find(tok);
    if (rit != relation_by_name_.end()) {
      relations_in_text_order.push_back(rit->second);
      continue;
    }
    auto eit = entity_by_name_.find(tok);
    if (eit != entity_by_name_.end() && start_entity < 0) start_entity = eit->second;
  }
  if (start_entity < 0)
    throw std::runtime_error("synthenv: question mentions no known entity");

  state.known_entities.push_back(start_entity);
  // Usage order is innermost-first: the reverse of the nesting in the text.
  for (auto it = relations_in_text_order.rbegin(); it != relations_in_text_order.rend(); ++it)
    if (std::find(state.known_relations.begin(), state.known_relations.end(), *it) ==
        state.known_relations.end())
      state.known_relations.push_back(*it);
  return state;
}

ChainView Env::chain_view(const EnvState& state) const {
  const TokenSeq tokens =
      tokenize(world_->questions[static_cast<size_t>(state.question_index)].text);
  std::vector<int> chain;
  for (const auto& tok : tokens) {
    auto rit = relation_by_name_.find(tok);
    if (rit != relation_by_name_.end()) chain.push_back(rit->second);
  }
  std::reverse(chain.begin(), chain.end());

  ChainView view;
  view.frontier_entity = state.known_entities.empty() ? -1 : state.known_entities.front();
  for (int r : chain) {
    bool advanced = false;
    for (const Fact& f : state.matched_facts) {
      if (f.subject == view.frontier_entity && f.relation == r) {
        view.frontier_entity = f.object;
        ++view.progress;
        advanced = true;
        break;
      }
    }
    if (!advanced) break;
  }
  view.complete = view.progress == static_cast<int>(chain.size());
  view.next_relation = view.complete ? -1 : chain[static_cast<size_t>(view.progress)];
  return view;
}

std::vector<Action> Env::candidate_actions(const EnvState& state) const {
  std::vector<Action> out;
  if (state.done) return out;
  for (int e : state.known_entities)
    for (int r : state.known_relations)
      out.push_back({Action::Type::Search, e, r});
  // Answer candidates are entities the agent can actually commit to: the
  // question's entity and objects of facts it has looked up. Entities merely
  // mentioned in passages stay searchable but are not answers.
  std::vector<int> answerable;
  if (!state.known_entities.empty()) answerable.push_back(state.known_entities.front());
  for (const Fact& f : state.matched_facts)
    if (std::find(answerable.begin(), answerable.end(), f.object) == answerable.end())
      answerable.push_back(f.object);
  for (int e : answerable) out.push_back({Action::Type::Answer, e, -1});
  return out;
}

std::string Env::search_query_text(const Action& action) const {
  return world_->entities[static_cast<size_t>(action.entity)] + " " +
         world_->relations[static_cast<size_t>(action.relation)];
}

void Env::absorb_observation(EnvState& state, const std::vector<Passage>& passages) const {
  state.last_observation_objects.clear();
  for (const Passage& p : passages) {
    const TokenSeq tokens = tokenize(p.text);
    for (const auto& tok : tokens) {
      auto eit = entity_by_name_.find(tok);
      if (eit != entity_by_name_.end() &&
          std::find(state.known_entities.begin(), state.known_entities.end(), eit->second) ==
              state.known_entities.end())
        state.known_entities.push_back(eit->second);
      auto rit = relation_by_name_.find(tok);
      if (rit != relation_by_name_.end() &&
          std::find(state.known_relations.begin(), state.known_relations.end(), rit->second) ==
              state.known_relations.end())
        state.known_relations.push_back(rit->second);
    }
    // Fact sentences have the fixed shape "the R of S is O".
    for (size_t i = 0; i + 5 < tokens.size(); ++i) {
      if (tokens[i] != "the" || tokens[i + 2] != "of" || tokens[i + 4] != "is") continue;
      auto rit = relation_by_name_.find(tokens[i + 1]);
      auto sit = entity_by_name_.find(tokens[i + 3]);
      auto oit = entity_by_name_.find(tokens[i + 5]);
      if (rit == relation_by_name_.end() || sit == entity_by_name_.end() ||
          oit == entity_by_name_.end())
        continue;
      const Fact fact{sit->second, rit->second, oit->second};
      if (std::find(state.matched_facts.begin(), state.matched_facts.end(), fact) ==
          state.matched_facts.end())
        state.matched_facts.push_back(fact);
      if (std::find(state.last_observation_objects.begin(), state.last_observation_objects.end(),
                    fact.object) == state.last_observation_objects.end())
        state.last_observation_objects.push_back(fact.object);
    }
  }
}

Env::StepResult Env::step(const EnvState& state, const Action& action) const {
  if (state.done) throw std::invalid_argument("synthenv: step on a finished episode");
  const auto candidates = candidate_actions(state);
  if (std::find(candidates.begin(), candidates.end(), action) == candidates.end())
    throw std::invalid_argument("synthenv: action is not in the candidate set");

  StepResult result;
  result.state = state;
  EnvState& next = result.state;
  const int max_steps = world_->params.max_steps;

  if (action.type == Action::Type::Search) {
    const auto hits = index_.search(search_query_text(action), world_->params.top_k);
    for (const auto& hit : hits) {
      const Document& doc = world_->corpus.documents[doc_pos_.at(hit.doc_id)];
      result.observation.push_back({doc.id, doc.text});
    }
    next.searched_pairs.emplace_back(action.entity, action.relation);
    absorb_observation(next, result.observation);
    next.history.push_back({action, result.observation});
    ++next.step_index;
    if (next.step_index >= max_steps) next.done = true;
  } else {
    next.answered_entity = action.entity;
    next.history.push_back({action, {}});
    ++next.step_index;
    next.done = true;
  }
  return result;
}

Trajectory Env::to_trajectory(const EnvState& final_state) const {
  if (!final_state.done)
    throw std::invalid_argument("synthenv: cannot render an unfinished episode");

  Trajectory traj;
  traj.question = world_->questions[static_cast<size_t>(final_state.question_index)].text;
  for (const auto& item : final_state.history) {
    Step step;
    if (item.action.type == Action::Type::Search) {
      const auto& rel = world_->relations[static_cast<size_t>(item.action.relation)];
      const auto& ent = world_->entities[static_cast<size_t>(item.action.entity)];
      step.think = "I should look up the " + rel + " of " + ent + ".";
      step.search_query = search_query_text(item.action);
      step.retrieved = item.observation;
    } else {
      const auto& ent = world_->entities[static_cast<size_t>(item.action.entity)];
      step.think = "The answer is " + ent + ".";
    }
    traj.steps.push_back(std::move(step));
  }
  if (final_state.answered_entity.has_value())
    traj.answer = world_->entities[static_cast<size_t>(*final_state.answered_entity)];
  traj.raw_text = render(traj);
  return traj;
}

std::vector<Action> Env::oracle_plan(int question_index) const {
  if (question_index < 0 || question_index >= static_cast<int>(world_->questions.size()))
    throw std::out_of_range("synthenv: question index out of range");
  const WorldQuestion& q = world_->questions[static_cast<size_t>(question_index)];
  std::vector<Action> plan;
  int last_object = -1;
  for (int f : q.gold_chain) {
    const Fact& fact = world_->facts[static_cast<size_t>(f)];
    plan.push_back({Action::Type::Search, fact.subject, fact.relation});
    last_object = fact.object;
  }
  plan.push_back({Action::Type::Answer, last_object, -1});
  return plan;
}

}  // namespace birar
