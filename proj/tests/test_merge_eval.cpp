#include "birar/evalreport.hpp"
#include "birar/merge.hpp"

#include "birar/rng.hpp"
#include "birar/world_provider.hpp"
#include "helpers.hpp"

#include <cmath>
#include <cstring>

#include "doctest.h"

using namespace birar;
using birar::testing::TempDir;

namespace {

WorldParams eval_params() {
  WorldParams p;
  p.n_entities = 16;
  p.n_relations = 3;
  p.n_questions = 24;
  p.n_eval_questions = 8;
  p.hop_depth_mix = {0.5, 0.5, 0.0};
  p.distractors_per_doc = 1;
  return p;
}

const World& eval_world() {
  static const World world = generate_world(21, eval_params());
  return world;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("interpolation endpoints are bit-exact") {
  const std::vector<double> f = {1.0, -2.5, 0.3333333333333333, 1e-17};
  const std::vector<double> b = {3.0, 6.0, -0.1, 2e-17};
  CHECK(bits_equal(interpolate(f, b, 0.0), f));
  CHECK(bits_equal(interpolate(f, b, 1.0), b));
}

TEST_CASE("interpolation fixture arithmetic") {
  const auto mid = interpolate({1.0, 2.0}, {3.0, 6.0}, 0.25);
  CHECK(mid[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(mid[1] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("interpolating identical vectors is the identity") {
  const std::vector<double> theta = {0.5, -1.0, 2.0};
  for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const auto merged = interpolate(theta, theta, lambda);
    for (size_t i = 0; i < theta.size(); ++i)
      CHECK(merged[i] == doctest::Approx(theta[i]).epsilon(1e-15));
  }
}

TEST_CASE("interpolation is affine in lambda per coordinate") {
  Rng rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> f(6), b(6);
    for (double& v : f) v = 4.0 * rng.real01() - 2.0;
    for (double& v : b) v = 4.0 * rng.real01() - 2.0;
    const double l1 = rng.real01(), l3 = rng.real01();
    const double l2 = 0.5 * (l1 + l3);
    const auto t1 = interpolate(f, b, l1);
    const auto t2 = interpolate(f, b, l2);
    const auto t3 = interpolate(f, b, l3);
    for (size_t i = 0; i < f.size(); ++i)
      CHECK(std::abs(0.5 * (t1[i] + t3[i]) - t2[i]) <= 1e-12);
  }
}

TEST_CASE("interpolation validates its inputs") {
  CHECK_THROWS_AS(interpolate({1.0}, {1.0, 2.0}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(interpolate({1.0}, {2.0}, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(interpolate({1.0}, {2.0}, 1.1), std::invalid_argument);
}

TEST_CASE("the default merge weight is the paper's choice") {
  CHECK(MergeSpec{}.lambda == 0.25);
  CHECK(kDefaultLambdaGrid == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("uniform-random baseline EM on the seed-7 world stays pinned") {
  // Established once over 5 policy seeds: mean EM 0.038 (0.02..0.07 per seed).
  const World world = generate_world(7, WorldParams{});
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  const auto eval_qs = world.split_indices("eval");
  double mean = 0.0;
  for (uint64_t seed : {1, 2, 3, 4, 5})
    mean += evaluate(uniform_random_policy(seed), env, eval_qs, provider).mean.em;
  mean /= 5.0;
  CHECK(std::abs(mean - 0.038) <= 0.05);
}

TEST_CASE("oracle policy reaches EM 1 with hop_depth search calls") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  const auto eval_qs = world.split_indices("eval");
  const EvalReport report =
      evaluate(oracle_policy(env), env, eval_qs, provider, "oracle", -1.0, 0, "eval");
  CHECK(report.mean.em == 1.0);
  for (size_t i = 0; i < report.rows.size(); ++i) {
    const auto& q = world.questions[static_cast<size_t>(eval_qs[i])];
    CHECK(report.rows[i].em == 1.0);
    CHECK(report.rows[i].search_calls == q.hop_depth);
  }
}

TEST_CASE("aggregates equal the means of the rows") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  const EvalReport report = evaluate(uniform_random_policy(9), env,
                                     world.split_indices("eval"), provider, "random");
  REQUIRE(!report.rows.empty());
  double em = 0.0, rl = 0.0, sc = 0.0, rf = 0.0, rb = 0.0;
  for (const EvalRow& r : report.rows) {
    em += r.em;
    rl += r.response_length;
    sc += r.search_calls;
    rf += r.r_forward;
    rb += r.r_backward;
  }
  const double n = static_cast<double>(report.rows.size());
  CHECK(std::abs(report.mean.em - em / n) <= 1e-12);
  CHECK(std::abs(report.mean.response_length - rl / n) <= 1e-12);
  CHECK(std::abs(report.mean.search_calls - sc / n) <= 1e-12);
  CHECK(std::abs(report.mean.r_forward - rf / n) <= 1e-12);
  CHECK(std::abs(report.mean.r_backward - rb / n) <= 1e-12);
}

TEST_CASE("greedy evaluation is deterministic") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  Rng rng(71);
  std::vector<double> w(kFeatureDim);
  for (double& v : w) v = rng.real01() - 0.5;
  const auto qs = world.split_indices("eval");
  const EvalReport a = evaluate(greedy_policy(w), env, qs, provider);
  const EvalReport b = evaluate(greedy_policy(w), env, qs, provider);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].em == b.rows[i].em);
    CHECK(a.rows[i].r_forward == b.rows[i].r_forward);
  }
}

TEST_CASE("sweep rows cover the lambda grid with exact endpoints") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  Rng rng(73);
  std::vector<double> theta_f(kFeatureDim), theta_b(kFeatureDim);
  for (double& v : theta_f) v = rng.real01() - 0.5;
  for (double& v : theta_b) v = rng.real01() - 0.5;

  const auto qs = world.split_indices("eval");
  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  const auto rows = sweep(theta_f, theta_b, grid, env, qs, provider);
  REQUIRE(rows.size() == grid.size());
  for (size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].lambda == grid[i]);

  const EvalReport at_f = evaluate(greedy_policy(theta_f), env, qs, provider);
  const EvalReport at_b = evaluate(greedy_policy(theta_b), env, qs, provider);
  CHECK(rows.front().em == at_f.mean.em);
  CHECK(rows.front().search_calls == at_f.mean.search_calls);
  CHECK(rows.back().em == at_b.mean.em);
  CHECK(rows.back().search_calls == at_b.mean.search_calls);

  CHECK_THROWS_AS(sweep(theta_f, theta_b, {}, env, qs, provider), std::invalid_argument);
  const std::string csv = sweep_csv(rows);
  CHECK(csv.find("lambda,em,response_length,search_calls") == 0);
}

TEST_CASE("comparisons require matching worlds and report deltas") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  const auto qs = world.split_indices("eval");
  EvalReport a = evaluate(oracle_policy(env), env, qs, provider, "oracle", -1.0, 0, "eval");
  EvalReport b = evaluate(uniform_random_policy(3), env, qs, provider, "random", -1.0, 0, "eval");

  const Comparison cmp = compare({a, b});
  CHECK(cmp.labels == std::vector<std::string>{"oracle", "random"});
  CHECK(cmp.deltas[0].em == 0.0);
  CHECK(cmp.deltas[1].em == doctest::Approx(b.mean.em - a.mean.em).epsilon(1e-12));

  EvalReport other = b;
  other.world_id = "elsewhere";
  CHECK_THROWS_AS(compare({a, other}), std::invalid_argument);

  TempDir dir("cmp_io");
  emit_comparison_csv(cmp, dir.str() + "/cmp.csv");
  emit_comparison_json(cmp, dir.str() + "/cmp.json");
  CHECK(birar::testing::read_file(dir.str() + "/cmp.csv").find("oracle") != std::string::npos);
}

TEST_CASE("report CSV round trips to identical aggregates") {
  const World& world = eval_world();
  const Env env(world);
  const NGramProvider provider = make_world_provider(world);
  const EvalReport report = evaluate(uniform_random_policy(5), env,
                                     world.split_indices("eval"), provider, "random");
  TempDir dir("report_io");
  const std::string path = dir.str() + "/report.csv";
  emit_report_csv(report, path);
  const auto rows = read_report_rows_csv(path);
  REQUIRE(rows.size() == report.rows.size());
  const EvalAggregates again = aggregate_rows(rows);
  CHECK(again.em == report.mean.em);
  CHECK(again.response_length == report.mean.response_length);
  CHECK(again.search_calls == report.mean.search_calls);
  CHECK(again.r_forward == report.mean.r_forward);
  CHECK(again.r_backward == report.mean.r_backward);

  emit_report_json(report, dir.str() + "/report.json");
  CHECK(birar::testing::read_file(dir.str() + "/report.json").find("\"mean\"") !=
        std::string::npos);
}

TEST_CASE("the training plot references every logged step exactly once") {
  std::vector<MetricsRow> metrics;
  for (int s = 1; s <= 30; ++s) {
    MetricsRow row;
    row.step = s;
    row.reward = 0.5 + 0.01 * s;
    metrics.push_back(row);
  }
  TempDir dir("plot_io");
  const std::string path = dir.str() + "/plot.svg";
  write_metric_plot_svg(metrics, "reward", path);
  const std::string svg = birar::testing::read_file(path);
  const size_t start = svg.find("points=\"");
  REQUIRE(start != std::string::npos);
  const size_t end = svg.find('"', start + 8);
  const std::string points = svg.substr(start + 8, end - start - 8);
  // one "x,y" pair per step
  CHECK(std::count(points.begin(), points.end(), ',') == 30);
  CHECK(svg.find("<svg") == 0);

  CHECK_THROWS_AS(write_metric_plot_svg(metrics, "nope", dir.str() + "/x.svg"),
                  std::invalid_argument);
  CHECK_THROWS_AS(write_metric_plot_svg({}, "reward", dir.str() + "/y.svg"),
                  std::invalid_argument);
}
