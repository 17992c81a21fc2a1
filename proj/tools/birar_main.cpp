#include "birar/evalreport.hpp"
#include "birar/json_io.hpp"
#include "birar/merge.hpp"
#include "birar/retrieval.hpp"
#include "birar/rewards.hpp"
#include "birar/service.hpp"
#include "birar/synthenv.hpp"
#include "birar/trainer.hpp"
#include "birar/world_provider.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

namespace {

using namespace birar;

// Raised for problems the user can fix (bad paths, bad flag combinations).
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProviderOptions {
  std::string kind = "ngram";  // ngram | remote
  std::string world_dir;
  std::string corpus_path;
  int ngram_order = 2;
  double ngram_k = 0.25;
  double cache_weight = 0.3;
  std::string remote_endpoint;
  std::string remote_model;
};

void add_provider_options(CLI::App* cmd, ProviderOptions& opts, bool with_world) {
  cmd->add_option("--provider", opts.kind, "Scoring provider: ngram | remote")
      ->check(CLI::IsMember({"ngram", "remote"}))
      ->capture_default_str();
  if (with_world) cmd->add_option("--world", opts.world_dir, "World directory (gen-env output)");
  cmd->add_option("--corpus", opts.corpus_path,
                  "Corpus JSONL used to train the n-gram provider (alternative to --world)");
  cmd->add_option("--ngram-order", opts.ngram_order, "n-gram order")->capture_default_str();
  cmd->add_option("--ngram-k", opts.ngram_k, "add-k smoothing constant")->capture_default_str();
  cmd->add_option("--cache-weight", opts.cache_weight,
                  "context-cache interpolation weight in [0, 1)")
      ->capture_default_str();
  cmd->add_option("--endpoint", opts.remote_endpoint,
                  "Remote logprob endpoint URL (overrides BIRAR_LM_ENDPOINT)")
      ->envname("BIRAR_LM_ENDPOINT");
  cmd->add_option("--model", opts.remote_model, "Remote model name (overrides BIRAR_LM_MODEL)")
      ->envname("BIRAR_LM_MODEL");
}

std::unique_ptr<LmProvider> make_provider(const ProviderOptions& opts, const World* world) {
  if (opts.kind == "remote") {
    RemoteProviderConfig cfg = RemoteProviderConfig::from_env();
    if (!opts.remote_endpoint.empty()) cfg.endpoint = opts.remote_endpoint;
    if (!opts.remote_model.empty()) cfg.model = opts.remote_model;
    try {
      return std::make_unique<RemoteProvider>(cfg);
    } catch (const ProviderError& e) {
      throw UserError(e.what());
    }
  }
  if (world != nullptr)
    return std::make_unique<NGramProvider>(
        make_world_provider(*world, opts.ngram_order, opts.ngram_k, opts.cache_weight));
  if (!opts.corpus_path.empty()) {
    const Corpus corpus = load_corpus_jsonl(opts.corpus_path);
    std::vector<TokenSeq> seqs;
    for (const Document& doc : corpus.documents)
      seqs.push_back(tokenize(doc.title + " " + doc.text));
    return std::make_unique<NGramProvider>(
        NGramModel::train(seqs, opts.ngram_order, opts.ngram_k), opts.cache_weight);
  }
  throw UserError("ngram provider needs --world or --corpus");
}

World load_world_or_fail(const std::string& dir) {
  if (dir.empty()) throw UserError("missing --world directory");
  if (!std::filesystem::exists(dir + "/world.json"))
    throw UserError("no world.json under '" + dir + "'");
  return load_world(dir);
}

NidVariant variant_from_flag(const std::string& name) {
  if (name == "paper_min_min") return NidVariant::PaperMinMin;
  if (name == "classic_max_max") return NidVariant::ClassicMaxMax;
  throw UserError("unknown NID variant '" + name + "'");
}

std::vector<int> resolve_question_set(const World& world, const std::string& spec) {
  if (spec == "all" || spec.empty()) {
    std::vector<int> all(world.questions.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  if (spec == "train" || spec == "eval") {
    const auto idx = world.split_indices(spec);
    if (idx.empty()) throw UserError("world has no '" + spec + "' questions");
    return idx;
  }
  // Otherwise a questions.jsonl path; match by id.
  std::ifstream in(spec);
  if (!in) throw UserError("cannot open question set '" + spec + "'");
  std::vector<int> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id"))
      throw UserError("bad question line in '" + spec + "'");
    const std::string id = j["id"].get<std::string>();
    bool found = false;
    for (size_t i = 0; i < world.questions.size(); ++i) {
      if (world.questions[i].id == id) {
        out.push_back(static_cast<int>(i));
        found = true;
        break;
      }
    }
    if (!found) throw UserError("question id '" + id + "' not present in the world");
  }
  if (out.empty()) throw UserError("question set '" + spec + "' is empty");
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"bi-rar: bidirectional retrieval-augmented reasoning lab"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (sections per subcommand)")
      ->envname("BIRAR_CONFIG");
  app.allow_config_extras(false);
  // lets `birar train --config f` reach the app-level config option
  app.fallthrough(true);

  // ---- build-index ----
  auto* cmd_index = app.add_subcommand("build-index", "Build a BM25 index from a JSONL corpus");
  std::string bi_corpus, bi_out;
  double bi_k1 = Bm25Index::kDefaultK1, bi_b = Bm25Index::kDefaultB;
  cmd_index->add_option("--corpus", bi_corpus, "Corpus JSONL path")->required();
  cmd_index->add_option("--out", bi_out, "Output index path")->required();
  cmd_index->add_option("--k1", bi_k1, "BM25 k1")->capture_default_str();
  cmd_index->add_option("--b", bi_b, "BM25 b")->capture_default_str();

  // ---- gen-env ----
  auto* cmd_gen = app.add_subcommand("gen-env", "Generate a synthetic multi-hop QA world");
  uint64_t ge_seed = 7;
  std::string ge_out;
  WorldParams ge_params;
  std::vector<double> ge_mix = {ge_params.hop_depth_mix[0], ge_params.hop_depth_mix[1],
                                ge_params.hop_depth_mix[2]};
  cmd_gen->add_option("--seed", ge_seed, "World seed")->required();
  cmd_gen->add_option("--out", ge_out, "Output directory")->required();
  cmd_gen->add_option("--entities", ge_params.n_entities, "Entity count")->capture_default_str();
  cmd_gen->add_option("--relations", ge_params.n_relations, "Relation count")
      ->capture_default_str();
  cmd_gen->add_option("--questions", ge_params.n_questions, "Question count")
      ->capture_default_str();
  cmd_gen->add_option("--eval-questions", ge_params.n_eval_questions,
                      "Questions reserved for the eval split")
      ->capture_default_str();
  cmd_gen->add_option("--hop-mix", ge_mix, "Hop depth mix for depths 1,2,3")
      ->delimiter(',')
      ->expected(3);
  cmd_gen->add_option("--distractors", ge_params.distractors_per_doc,
                      "Distractor sentences per document")
      ->capture_default_str();
  cmd_gen->add_option("--fact-density", ge_params.fact_density,
                      "Probability of a fact per (entity, relation)")
      ->capture_default_str();
  cmd_gen->add_option("--max-steps", ge_params.max_steps, "Episode step budget")
      ->capture_default_str();
  cmd_gen->add_option("--top-k", ge_params.top_k, "Passages returned per search")
      ->capture_default_str();

  // ---- train ----
  auto* cmd_train = app.add_subcommand("train", "Train a policy with GRPO under one reward");
  std::string tr_world, tr_mode, tr_out, tr_variant = "paper_min_min";
  TrainConfig tr_cfg;
  cmd_train->add_option("--world", tr_world, "World directory")->required();
  cmd_train->add_option("--mode", tr_mode, "Reward mode: outcome | forward | backward")
      ->required()
      ->check(CLI::IsMember({"outcome", "forward", "backward"}));
  cmd_train->add_option("--out", tr_out, "Output directory")->required();
  cmd_train->add_option("--steps", tr_cfg.steps, "Training steps")->capture_default_str();
  cmd_train->add_option("--group-size", tr_cfg.group_size, "Rollouts per question (G)")
      ->capture_default_str();
  cmd_train->add_option("--lr", tr_cfg.learning_rate, "Learning rate")->capture_default_str();
  cmd_train->add_option("--beta", tr_cfg.kl_beta, "KL penalty weight")->capture_default_str();
  cmd_train->add_option("--epsilon", tr_cfg.clip_epsilon, "Clip ratio")->capture_default_str();
  cmd_train->add_option("--seed", tr_cfg.seed, "Training seed")->capture_default_str();
  cmd_train->add_option("--inner-epochs", tr_cfg.inner_epochs, "Updates per sampled group")
      ->capture_default_str();
  cmd_train->add_flag("--parallel", tr_cfg.parallel_rollouts,
                      "Sample group episodes concurrently");
  cmd_train->add_option("--variant", tr_variant, "NID variant")
      ->check(CLI::IsMember({"paper_min_min", "classic_max_max"}))
      ->capture_default_str();
  ProviderOptions tr_popts;
  cmd_train->add_option("--ngram-order", tr_popts.ngram_order, "n-gram order")
      ->capture_default_str();
  cmd_train->add_option("--ngram-k", tr_popts.ngram_k, "add-k smoothing constant")
      ->capture_default_str();
  cmd_train->add_option("--cache-weight", tr_popts.cache_weight,
                        "context-cache interpolation weight")
      ->capture_default_str();

  // ---- merge ----
  auto* cmd_merge = app.add_subcommand("merge", "Interpolate forward/backward checkpoints");
  MergeSpec mg_spec;
  std::string mg_out, mg_world, mg_questions = "eval";
  std::vector<double> mg_sweep;
  ProviderOptions mg_popts;
  cmd_merge->add_option("--forward", mg_spec.forward_path, "Forward checkpoint")->required();
  cmd_merge->add_option("--backward", mg_spec.backward_path, "Backward checkpoint")->required();
  cmd_merge->add_option("--lambda", mg_spec.lambda, "Interpolation weight on the backward model")
      ->capture_default_str();
  cmd_merge->add_option("--out", mg_out, "Output checkpoint path (or CSV path with --sweep)")
      ->required();
  cmd_merge->add_option("--sweep", mg_sweep, "Lambda grid; evaluates each point")->delimiter(',');
  cmd_merge->add_option("--world", mg_popts.world_dir, "World directory (required for --sweep)");
  cmd_merge->add_option("--questions", mg_questions, "Question set: train | eval | all | path")
      ->capture_default_str();
  cmd_merge->add_option("--ngram-order", mg_popts.ngram_order, "n-gram order")
      ->capture_default_str();
  cmd_merge->add_option("--ngram-k", mg_popts.ngram_k, "add-k smoothing constant")
      ->capture_default_str();
  cmd_merge->add_option("--cache-weight", mg_popts.cache_weight,
                        "context-cache interpolation weight")
      ->capture_default_str();

  // ---- eval ----
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a question set");
  std::string ev_ckpt, ev_world, ev_questions = "eval", ev_out, ev_csv;
  std::string ev_plot_log, ev_plot_metric = "reward", ev_plot_out;
  ProviderOptions ev_popts;
  cmd_eval->add_option("--ckpt", ev_ckpt, "Checkpoint JSON")->required();
  cmd_eval->add_option("--world", ev_world, "World directory")->required();
  cmd_eval->add_option("--questions", ev_questions, "Question set: train | eval | all | path")
      ->capture_default_str();
  cmd_eval->add_option("--out", ev_out, "Report JSON path")->required();
  cmd_eval->add_option("--csv", ev_csv, "Also write per-question rows as CSV");
  cmd_eval->add_option("--plot-log", ev_plot_log, "Training metrics.csv to plot");
  cmd_eval->add_option("--plot-metric", ev_plot_metric, "Metric column for the plot")
      ->capture_default_str();
  cmd_eval->add_option("--plot-out", ev_plot_out, "SVG output path for the plot");
  cmd_eval->add_option("--ngram-order", ev_popts.ngram_order, "n-gram order")
      ->capture_default_str();
  cmd_eval->add_option("--ngram-k", ev_popts.ngram_k, "add-k smoothing constant")
      ->capture_default_str();
  cmd_eval->add_option("--cache-weight", ev_popts.cache_weight,
                       "context-cache interpolation weight")
      ->capture_default_str();

  // ---- score-trajectory ----
  auto* cmd_score = app.add_subcommand("score-trajectory", "Score a trajectory JSON file");
  std::string sc_traj, sc_mode = "all", sc_gold, sc_out, sc_variant = "paper_min_min";
  ProviderOptions sc_popts;
  cmd_score->add_option("--traj", sc_traj, "Trajectory JSON path")->required();
  cmd_score->add_option("--gold", sc_gold, "Gold answer")->required();
  cmd_score->add_option("--mode", sc_mode, "forward | backward | outcome | all")
      ->check(CLI::IsMember({"forward", "backward", "outcome", "all"}))
      ->capture_default_str();
  cmd_score->add_option("--variant", sc_variant, "NID variant")
      ->check(CLI::IsMember({"paper_min_min", "classic_max_max"}))
      ->capture_default_str();
  cmd_score->add_option("--out", sc_out, "Write the JSON here instead of stdout");
  add_provider_options(cmd_score, sc_popts, true);

  // ---- serve ----
  auto* cmd_serve = app.add_subcommand("serve", "Run the scoring/retrieval HTTP service");
  std::string sv_host = "127.0.0.1", sv_index, sv_variant = "paper_min_min";
  int sv_port = 8080;
  ProviderOptions sv_popts;
  cmd_serve->add_option("--host", sv_host, "Bind address")->capture_default_str();
  cmd_serve->add_option("--port", sv_port, "Port")->capture_default_str();
  cmd_serve->add_option("--index", sv_index, "BM25 index file for /v1/retrieve");
  cmd_serve->add_option("--variant", sv_variant, "NID variant")
      ->check(CLI::IsMember({"paper_min_min", "classic_max_max"}))
      ->capture_default_str();
  add_provider_options(cmd_serve, sv_popts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return 1;
  }

  if (cmd_index->parsed()) {
    const Corpus corpus = load_corpus_jsonl(bi_corpus);
    const Bm25Index index = Bm25Index::build(corpus, bi_k1, bi_b);
    index.save(bi_out);
    std::cout << "indexed " << index.doc_count() << " documents -> " << bi_out << "\n";
    return 0;
  }

  if (cmd_gen->parsed()) {
    std::copy(ge_mix.begin(), ge_mix.end(), ge_params.hop_depth_mix.begin());
    const World world = generate_world(ge_seed, ge_params);
    save_world(world, ge_out);
    std::cout << "world seed=" << ge_seed << ": " << world.entities.size() << " entities, "
              << world.facts.size() << " facts, " << world.questions.size() << " questions -> "
              << ge_out << "\n";
    return 0;
  }

  if (cmd_train->parsed()) {
    const World world = load_world_or_fail(tr_world);
    const Env env(world);
    const NGramProvider provider =
        make_world_provider(world, tr_popts.ngram_order, tr_popts.ngram_k,
                            tr_popts.cache_weight);
    tr_cfg.mode = reward_mode_from_name(tr_mode);
    tr_cfg.variant = variant_from_flag(tr_variant);
    const TrainResult result = train(tr_cfg, env, provider, tr_out);
    std::cout << "trained " << tr_mode << " policy for " << tr_cfg.steps << " steps -> " << tr_out
              << "/checkpoint.json\n";
    if (!result.metrics.empty())
      std::cout << "final mean reward " << result.metrics.back().reward << "\n";
    return 0;
  }

  if (cmd_merge->parsed()) {
    const Checkpoint fwd = load_checkpoint(mg_spec.forward_path);
    const Checkpoint bwd = load_checkpoint(mg_spec.backward_path);
    if (!mg_sweep.empty()) {
      const World world = load_world_or_fail(mg_popts.world_dir);
      const Env env(world);
      const NGramProvider provider = make_world_provider(
          world, mg_popts.ngram_order, mg_popts.ngram_k, mg_popts.cache_weight);
      const auto questions = resolve_question_set(world, mg_questions);
      const auto rows = sweep(fwd.w, bwd.w, mg_sweep, env, questions, provider);
      std::ofstream out(mg_out);
      if (!out) throw UserError("cannot write " + mg_out);
      out << sweep_csv(rows);
      std::cout << "sweep over " << rows.size() << " lambda values -> " << mg_out << "\n";
      return 0;
    }
    Checkpoint merged;
    merged.w = interpolate(fwd.w, bwd.w, mg_spec.lambda);
    merged.config = fwd.config;
    merged.step = std::max(fwd.step, bwd.step);
    save_checkpoint(merged, mg_out);
    std::cout << "interpolated lambda=" << mg_spec.lambda << " -> " << mg_out << "\n";
    return 0;
  }

  if (cmd_eval->parsed()) {
    const World world = load_world_or_fail(ev_world);
    const Env env(world);
    const NGramProvider provider = make_world_provider(
        world, ev_popts.ngram_order, ev_popts.ngram_k, ev_popts.cache_weight);
    const Checkpoint ckpt = load_checkpoint(ev_ckpt);
    const auto questions = resolve_question_set(world, ev_questions);
    const EvalReport report =
        evaluate(greedy_policy(ckpt.w), env, questions, provider,
                 reward_mode_name(ckpt.config.mode), -1.0, ckpt.config.seed, ev_questions);
    emit_report_json(report, ev_out);
    if (!ev_csv.empty()) emit_report_csv(report, ev_csv);
    if (!ev_plot_log.empty() || !ev_plot_out.empty()) {
      if (ev_plot_log.empty() || ev_plot_out.empty())
        throw UserError("--plot-log and --plot-out must be given together");
      std::ifstream log(ev_plot_log);
      if (!log) throw UserError("cannot open " + ev_plot_log);
      std::vector<MetricsRow> metrics;
      std::string line;
      bool header = true;
      while (std::getline(log, line)) {
        if (header || line.empty()) {
          header = false;
          continue;
        }
        MetricsRow row;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &row.step, &row.reward,
                        &row.resp_len, &row.search_calls, &row.kl, &row.clip_frac) != 6)
          throw UserError("bad metrics row in " + ev_plot_log);
        metrics.push_back(row);
      }
      write_metric_plot_svg(metrics, ev_plot_metric, ev_plot_out);
    }
    std::cout << "eval em=" << report.mean.em << " search_calls=" << report.mean.search_calls
              << " -> " << ev_out << "\n";
    return 0;
  }

  if (cmd_score->parsed()) {
    std::ifstream in(sc_traj);
    if (!in) throw UserError("cannot open trajectory file '" + sc_traj + "'");
    nlohmann::json tj = nlohmann::json::parse(in, nullptr, false);
    if (tj.is_discarded()) throw UserError("trajectory file is not valid JSON");
    Trajectory traj;
    try {
      traj = trajectory_from_json(tj);
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }

    std::unique_ptr<World> world;
    if (!sc_popts.world_dir.empty())
      world = std::make_unique<World>(load_world_or_fail(sc_popts.world_dir));
    const auto provider = make_provider(sc_popts, world.get());
    const NidVariant variant = variant_from_flag(sc_variant);

    nlohmann::json out_json;
    if (sc_mode == "outcome") {
      RewardBreakdown b;
      b.correct = outcome_reward(traj, sc_gold) == 1.0;
      b.r_outcome = outcome_reward(traj, sc_gold);
      out_json = breakdown_to_json(b);
    } else {
      const RewardBreakdown b = score_trajectory(*provider, traj, sc_gold, variant);
      out_json = breakdown_to_json(b);
    }
    if (sc_out.empty()) {
      std::cout << out_json.dump(2) << "\n";
    } else {
      std::ofstream out(sc_out);
      if (!out) throw UserError("cannot write " + sc_out);
      out << out_json.dump(2) << "\n";
    }
    return 0;
  }

  if (cmd_serve->parsed()) {
    std::unique_ptr<Bm25Index> index;
    std::unique_ptr<World> world;
    if (!sv_popts.world_dir.empty())
      world = std::make_unique<World>(load_world_or_fail(sv_popts.world_dir));
    if (!sv_index.empty())
      index = std::make_unique<Bm25Index>(Bm25Index::load(sv_index));
    else if (world)
      index = std::make_unique<Bm25Index>(Bm25Index::build(world->corpus));
    const auto provider = make_provider(sv_popts, world.get());

    ServiceDeps deps;
    deps.index = index.get();
    deps.provider = provider.get();
    deps.variant = variant_from_flag(sv_variant);

    httplib::Server server;
    register_routes(server, deps);
    std::cout << "serving on http://" << sv_host << ":" << sv_port << "\n";
    if (!server.listen(sv_host, sv_port))
      throw UserError("cannot bind " + sv_host + ":" + std::to_string(sv_port));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
