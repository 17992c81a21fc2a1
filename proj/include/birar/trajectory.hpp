#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace birar {

struct Passage {
  std::string doc_id;
  std::string text;
  friend bool operator==(const Passage&, const Passage&) = default;
};

// One reasoning step: think text, optional search call, retrieved passages.
// retrieved may be nonempty only when search_query is present.
struct Step {
  std::string think;
  std::optional<std::string> search_query;
  std::vector<Passage> retrieved;
  friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
  std::string question;
  std::vector<Step> steps;
  std::optional<std::string> answer;
  std::string raw_text;
  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.question == b.question && a.steps == b.steps && a.answer == b.answer;
  }
};

struct TrajectoryParseError : std::runtime_error {
  enum class Kind { UnclosedTag, InformationWithoutSearch, MultipleAnswers, EmptyInput };
  TrajectoryParseError(Kind k, size_t off, std::string tag_name, const std::string& msg)
      : std::runtime_error("trajectory: " + msg), kind(k), offset(off), tag(std::move(tag_name)) {}
  Kind kind;
  size_t offset;
  std::string tag;
};

// Parses the tagged rollout format:
//   <think>...</think> <search>...</search> <information>...</information> <answer>...</answer>
// A step starts at each think tag; an information block attaches to the
// immediately preceding search. Text between top-level tags is ignored; tags
// nested inside a segment are literal text. question is left empty.
Trajectory parse(const std::string& raw);

// Inverse of parse at tag level: parse(render(t)) reproduces steps and answer.
std::string render(const Trajectory& traj);

// Think text of step i (1-based).
const std::string& step_text(const Trajectory& traj, size_t i);

// Number of steps that issued a search query.
int search_calls(const Trajectory& traj);

// Token count of all model-generated segments (think + search + answer),
// excluding retrieved information.
int response_length(const Trajectory& traj);

struct CharSpan {
  size_t begin = 0;
  size_t end = 0;  // half-open
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

// Character spans of raw that are model-generated: the complement of
// information contents plus tag markers. Retrieved text never appears here,
// which is what keeps it out of any training loss.
std::vector<CharSpan> generated_char_spans(const std::string& raw);

}  // namespace birar
