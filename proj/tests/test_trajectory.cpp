#include "birar/trajectory.hpp"

#include "birar/rng.hpp"
#include "birar/tokenize.hpp"
#include "helpers.hpp"

#include <algorithm>

#include "doctest.h"

using namespace birar;

namespace {

const std::string kTwoStepRaw =
    "<think>t1</think><search>q1</search><information>d1</information>"
    "<think>t2</think><answer>a</answer>";

Trajectory random_trajectory(Rng& rng) {
  static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon"};
  auto text = [&](size_t max_words) {
    std::string out;
    const size_t n = 1 + rng.below(max_words);
    for (size_t i = 0; i < n; ++i) {
      if (i) out.push_back(' ');
      out += words[rng.below(words.size())];
    }
    return out;
  };

  Trajectory traj;
  const size_t n_steps = 1 + rng.below(3);
  for (size_t s = 0; s < n_steps; ++s) {
    Step step;
    step.think = text(4);
    if (rng.below(2) == 0) {
      step.search_query = text(2);
      const size_t n_passages = rng.below(3);
      for (size_t p = 0; p < n_passages; ++p) {
        Passage passage;
        if (rng.below(2) == 0) passage.doc_id = "doc" + std::to_string(rng.below(10));
        passage.text = text(5);
        step.retrieved.push_back(std::move(passage));
      }
    }
    traj.steps.push_back(std::move(step));
  }
  if (rng.below(4) != 0) traj.answer = text(2);
  return traj;
}

}  // namespace

TEST_CASE("parse segments the tagged rollout format") {
  const Trajectory traj = parse(kTwoStepRaw);
  REQUIRE(traj.steps.size() == 2);
  CHECK(traj.steps[0].think == "t1");
  REQUIRE(traj.steps[0].search_query.has_value());
  CHECK(*traj.steps[0].search_query == "q1");
  REQUIRE(traj.steps[0].retrieved.size() == 1);
  CHECK(traj.steps[0].retrieved[0].text == "d1");
  CHECK(traj.steps[0].retrieved[0].doc_id.empty());
  CHECK(traj.steps[1].think == "t2");
  CHECK_FALSE(traj.steps[1].search_query.has_value());
  REQUIRE(traj.answer.has_value());
  CHECK(*traj.answer == "a");
  CHECK(traj.raw_text == kTwoStepRaw);
}

TEST_CASE("parse reports unclosed tags with offset and tag name") {
  const std::string raw = "<think>t</think><answer>a";
  try {
    parse(raw);
    FAIL("expected TrajectoryParseError");
  } catch (const TrajectoryParseError& e) {
    CHECK(e.kind == TrajectoryParseError::Kind::UnclosedTag);
    CHECK(e.tag == "answer");
    CHECK(e.offset == raw.find("<answer>"));
  }
}

TEST_CASE("information without a preceding search is rejected") {
  try {
    parse("<information>d</information>");
    FAIL("expected TrajectoryParseError");
  } catch (const TrajectoryParseError& e) {
    CHECK(e.kind == TrajectoryParseError::Kind::InformationWithoutSearch);
  }
  // a fresh think resets the attachment point
  CHECK_THROWS_AS(
      parse("<think>t</think><search>s</search><think>u</think><information>d</information>"),
      TrajectoryParseError);
}

TEST_CASE("multiple answers and empty input are rejected") {
  try {
    parse("<answer>a</answer><answer>b</answer>");
    FAIL("expected TrajectoryParseError");
  } catch (const TrajectoryParseError& e) {
    CHECK(e.kind == TrajectoryParseError::Kind::MultipleAnswers);
  }
  try {
    parse("");
    FAIL("expected TrajectoryParseError");
  } catch (const TrajectoryParseError& e) {
    CHECK(e.kind == TrajectoryParseError::Kind::EmptyInput);
  }
  CHECK_THROWS_AS(parse("  \n\t "), TrajectoryParseError);
}

TEST_CASE("tags nested inside a segment are literal text") {
  const Trajectory traj = parse("<think>use <search>inner</search> here</think><answer>a</answer>");
  REQUIRE(traj.steps.size() == 1);
  CHECK(traj.steps[0].think == "use <search>inner</search> here");
  CHECK_FALSE(traj.steps[0].search_query.has_value());
}

TEST_CASE("text between top-level tags is ignored") {
  const Trajectory traj = parse("<think>t</think> stray text <answer>a</answer>");
  CHECK(traj.steps.size() == 1);
  CHECK(*traj.answer == "a");
}

TEST_CASE("render emits no tags for absent parts") {
  Trajectory traj;
  traj.steps.push_back({"t", std::nullopt, {}});
  const std::string raw = render(traj);
  CHECK(raw.find("<answer>") == std::string::npos);
  CHECK(raw.find("<search>") == std::string::npos);
  CHECK(raw.find("<information>") == std::string::npos);

  traj.steps[0].retrieved.push_back({"d1", "text"});
  CHECK_THROWS_AS(render(traj), std::invalid_argument);
}

TEST_CASE("parse-render round trip on the fixture") {
  const Trajectory traj = parse(kTwoStepRaw);
  CHECK(parse(render(traj)) == traj);
}

TEST_CASE("parse-render round trip on random trajectories") {
  Rng rng(47);
  for (int trial = 0; trial < 60; ++trial) {
    const Trajectory traj = random_trajectory(rng);
    CHECK(parse(render(traj)) == traj);
  }
}

TEST_CASE("step_text, search_calls and response_length") {
  const Trajectory traj = parse(kTwoStepRaw);
  CHECK(step_text(traj, 1) == "t1");
  CHECK(step_text(traj, 2) == "t2");
  CHECK_THROWS_AS(step_text(traj, 0), std::out_of_range);
  CHECK_THROWS_AS(step_text(traj, 3), std::out_of_range);
  CHECK(search_calls(traj) == 1);
  // t1 + q1 + t2 + a; the retrieved passage is excluded
  CHECK(response_length(traj) == 4);

  Trajectory longer = traj;
  longer.steps[0].retrieved[0].text = "many extra passage tokens here";
  CHECK(response_length(longer) == 4);
}

TEST_CASE("generated spans exclude retrieved text on random trajectories") {
  Rng rng(53);
  for (int trial = 0; trial < 40; ++trial) {
    const Trajectory traj = random_trajectory(rng);
    const std::string raw = render(traj);
    const auto spans = generated_char_spans(raw);
    auto in_generated = [&](size_t pos) {
      return std::any_of(spans.begin(), spans.end(),
                         [pos](const CharSpan& s) { return pos >= s.begin && pos < s.end; });
    };
    size_t cursor = 0;
    for (const Step& step : traj.steps) {
      if (!step.think.empty()) {
        cursor = raw.find("<think>" + step.think, cursor);
        REQUIRE(cursor != std::string::npos);
        CHECK(in_generated(cursor + 7));
      }
      for (const Passage& p : step.retrieved) {
        if (p.doc_id.empty()) continue;
        const size_t at = raw.find("[" + p.doc_id + "]", cursor);
        REQUIRE(at != std::string::npos);
        CHECK_FALSE(in_generated(at));
      }
    }
  }
}

TEST_CASE("generated spans are the complement of information plus tags") {
  const std::string raw = kTwoStepRaw;
  const auto spans = generated_char_spans(raw);

  auto in_generated = [&](size_t pos) {
    return std::any_of(spans.begin(), spans.end(),
                       [pos](const CharSpan& s) { return pos >= s.begin && pos < s.end; });
  };

  // think, search and answer contents are generated
  CHECK(in_generated(raw.find("t1")));
  CHECK(in_generated(raw.find("q1")));
  CHECK(in_generated(raw.find("t2")));
  CHECK(in_generated(raw.rfind("a</answer>")));
  // retrieved text and tag markers are not
  CHECK_FALSE(in_generated(raw.find("d1")));
  CHECK_FALSE(in_generated(raw.find("<think>")));
  CHECK_FALSE(in_generated(raw.find("</answer>") + 1));

  // spans are disjoint, ordered, and cover exactly the complement
  size_t generated_chars = 0;
  size_t prev_end = 0;
  for (const CharSpan& s : spans) {
    CHECK(s.begin >= prev_end);
    CHECK(s.end > s.begin);
    prev_end = s.end;
    generated_chars += s.end - s.begin;
  }
  const size_t info_len = std::string("d1").size();
  size_t tag_len = 0;
  for (const char* tag : {"think", "search", "information", "answer"}) {
    const std::string open = std::string("<") + tag + ">";
    const std::string close = std::string("</") + tag + ">";
    size_t pos = 0;
    while ((pos = raw.find(open, pos)) != std::string::npos) {
      tag_len += open.size();
      pos += open.size();
    }
    pos = 0;
    while ((pos = raw.find(close, pos)) != std::string::npos) {
      tag_len += close.size();
      pos += close.size();
    }
  }
  CHECK(generated_chars == raw.size() - info_len - tag_len);
}
