#include "birar/infodist.hpp"

#include "birar/rng.hpp"
#include "helpers.hpp"

#include <cmath>

#include "doctest.h"

using namespace birar;
using birar::testing::MockProvider;

namespace {

// min{2,4} / min{8,16} = 0.25 for the paper form; max{2,4} / max{8,16} for the
// classic form.
MockProvider quarter_fixture() {
  MockProvider mock;
  mock.set("a", "b", "c", 2.0);
  mock.set("b", "a", "c", 4.0);
  mock.set("a", "c", "", 8.0);
  mock.set("b", "c", "", 16.0);
  return mock;
}

Trajectory one_step_fixture() {
  Trajectory traj;
  traj.question = "q";
  traj.steps.push_back({"t1", std::nullopt, {}});
  traj.answer = "a";
  return traj;
}

}  // namespace

TEST_CASE("nid reproduces the fixture table") {
  const MockProvider mock = quarter_fixture();
  const Distance d = nid(mock, {"a"}, {"b"}, {"c"});
  CHECK(d.value == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_FALSE(d.degenerate);

  const Distance swapped = nid(mock, {"b"}, {"a"}, {"c"});
  CHECK(swapped.value == d.value);

  const Distance classic = nid(mock, {"a"}, {"b"}, {"c"}, NidVariant::ClassicMaxMax);
  CHECK(classic.value == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("variants pick different numerator and denominator") {
  MockProvider mock;
  mock.set("a", "b", "c", 2.0);
  mock.set("b", "a", "c", 4.0);
  mock.set("a", "c", "", 8.0);
  mock.set("b", "c", "", 10.0);
  CHECK(nid(mock, {"a"}, {"b"}, {"c"}, NidVariant::PaperMinMin).value ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK(nid(mock, {"a"}, {"b"}, {"c"}, NidVariant::ClassicMaxMax).value ==
        doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("degenerate denominator returns a flagged zero") {
  MockProvider mock;
  mock.set("a", "b", "c", 2.0);
  mock.set("b", "a", "c", 4.0);
  mock.set("a", "c", "", 0.0);
  mock.set("b", "c", "", 1e-12);
  const Distance d = nid(mock, {"a"}, {"b"}, {"c"});
  CHECK(d.value == 0.0);
  CHECK(d.degenerate);
}

TEST_CASE("step_to_answer evaluates d(T_i, A | Q)") {
  MockProvider mock;
  mock.set("t1", "a", "q", 3.0);
  mock.set("a", "t1", "q", 6.0);
  mock.set("t1", "q", "", 12.0);
  mock.set("a", "q", "", 4.0);
  const Trajectory traj = one_step_fixture();
  const Distance d = step_to_answer(mock, traj, 1);
  CHECK(d.value == doctest::Approx(0.75).epsilon(1e-15));
  // matches a direct nid call exactly
  CHECK(nid(mock, tokenize("t1"), tokenize("a"), tokenize("q")).value == d.value);
  // the forward reward of this step
  CHECK(std::exp(-d.value) == doctest::Approx(0.4723665527410147).epsilon(1e-12));
}

TEST_CASE("step text identical to the answer has distance zero") {
  MockProvider mock;
  mock.set("a", "a", "q", 0.0);  // K(T|A,Q) = 0 for a memorizing provider
  mock.set("a", "q", "", 4.0);
  Trajectory traj = one_step_fixture();
  traj.steps[0].think = "a";
  CHECK(step_to_answer(mock, traj, 1).value == 0.0);
}

TEST_CASE("step_to_question mirrors step_to_answer with swapped roles") {
  MockProvider mock;
  mock.set("t1", "q", "a", 1.0);
  mock.set("q", "t1", "a", 5.0);
  mock.set("t1", "a", "", 2.0);
  mock.set("q", "a", "", 10.0);
  const Trajectory traj = one_step_fixture();
  const Distance d = step_to_question(mock, traj, 1);
  CHECK(d.value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(nid(mock, tokenize("t1"), tokenize("q"), tokenize("a")).value == d.value);
}

TEST_CASE("empty think text yields distance zero") {
  MockProvider mock;
  mock.set("q", "", "a", 5.0);  // K(Q | eps, A)
  mock.set("t1", "a", "", 2.0);
  mock.set("q", "a", "", 10.0);
  Trajectory traj = one_step_fixture();
  traj.steps[0].think = "";
  const Distance d = step_to_question(mock, traj, 1);
  CHECK(d.value == 0.0);  // K(eps | Q, A) = 0 makes the numerator zero
}

TEST_CASE("step distance errors") {
  const MockProvider mock = quarter_fixture();
  Trajectory traj = one_step_fixture();
  CHECK_THROWS_AS(step_to_answer(mock, traj, 0), std::out_of_range);
  CHECK_THROWS_AS(step_to_answer(mock, traj, 2), std::out_of_range);
  traj.answer.reset();
  CHECK_THROWS_AS(step_to_answer(mock, traj, 1), std::invalid_argument);
  CHECK_THROWS_AS(step_to_question(mock, traj, 1), std::invalid_argument);
}

TEST_CASE("nid symmetry and non-negativity under the n-gram provider") {
  const NGramProvider provider(
      NGramModel::train({tokenize("sun tide rock moon"), tokenize("rock moon sun"),
                         tokenize("tide tide rock")},
                        2, 0.4),
      0.3);
  Rng rng(71);
  static const std::vector<std::string> vocab = {"sun", "tide", "rock", "moon", "sky"};
  auto random_seq = [&](size_t max_len) {
    TokenSeq out;
    const size_t n = 1 + rng.below(max_len);
    for (size_t i = 0; i < n; ++i) out.push_back(vocab[rng.below(vocab.size())]);
    return out;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const TokenSeq a = random_seq(4), b = random_seq(4), c = random_seq(4);
    for (const NidVariant variant : {NidVariant::PaperMinMin, NidVariant::ClassicMaxMax}) {
      const Distance ab = nid(provider, a, b, c, variant);
      const Distance ba = nid(provider, b, a, c, variant);
      CHECK(ab.value == ba.value);  // exact
      CHECK(ab.value >= 0.0);
      CHECK(std::isfinite(ab.value));
    }
  }
}
