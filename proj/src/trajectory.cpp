#include "birar/trajectory.hpp"

#include "birar/tokenize.hpp"

#include <algorithm>
#include <array>

namespace birar {

namespace {

enum class Tag { Think, Search, Information, Answer };

constexpr std::array<std::pair<Tag, const char*>, 4> kTags = {{
    {Tag::Think, "think"},
    {Tag::Search, "search"},
    {Tag::Information, "information"},
    {Tag::Answer, "answer"},
}};

struct Segment {
  Tag tag;
  size_t open_pos;       // position of '<'
  size_t content_begin;  // after the opening tag
  size_t content_end;    // position of the closing tag's '<'
  size_t close_end;      // one past the closing tag
};

std::vector<Segment> scan_segments(const std::string& raw) {
  std::vector<Segment> segs;
  size_t pos = 0;
  while (pos < raw.size()) {
    size_t best_pos = std::string::npos;
    Tag best_tag = Tag::Think;
    const char* best_name = nullptr;
    for (const auto& [tag, name] : kTags) {
      const std::string open = std::string("<") + name + ">";
      const size_t found = raw.find(open, pos);
      if (found != std::string::npos && found < best_pos) {
        best_pos = found;
        best_tag = tag;
        best_name = name;
      }
    }
    if (best_pos == std::string::npos) break;

    const std::string open = std::string("<") + best_name + ">";
    const std::string close = std::string("</") + best_name + ">";
    const size_t content_begin = best_pos + open.size();
    const size_t close_pos = raw.find(close, content_begin);
    if (close_pos == std::string::npos) {
      throw TrajectoryParseError(TrajectoryParseError::Kind::UnclosedTag, best_pos, best_name,
                                 std::string("unclosed <") + best_name + "> tag at offset " +
                                     std::to_string(best_pos));
    }
    segs.push_back({best_tag, best_pos, content_begin, close_pos, close_pos + close.size()});
    pos = close_pos + close.size();
  }
  return segs;
}

std::vector<Passage> parse_passages(const std::string& content) {
  std::vector<Passage> out;
  size_t start = 0;
  while (start <= content.size()) {
    size_t eol = content.find('\n', start);
    if (eol == std::string::npos) eol = content.size();
    std::string line = content.substr(start, eol - start);
    // trim
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      const auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      Passage p;
      if (line.front() == '[') {
        const auto rb = line.find(']');
        if (rb != std::string::npos) {
          p.doc_id = line.substr(1, rb - 1);
          size_t text_start = rb + 1;
          if (text_start < line.size() && line[text_start] == ' ') ++text_start;
          p.text = line.substr(text_start);
        } else {
          p.text = line;
        }
      } else {
        p.text = line;
      }
      out.push_back(std::move(p));
    }
    if (eol == content.size()) break;
    start = eol + 1;
  }
  return out;
}

std::string trim_copy(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

Trajectory parse(const std::string& raw) {
  if (trim_copy(raw).empty())
    throw TrajectoryParseError(TrajectoryParseError::Kind::EmptyInput, 0, "",
                               "empty rollout text");

  Trajectory traj;
  traj.raw_text = raw;
  const std::vector<Segment> segs = scan_segments(raw);

  for (const auto& seg : segs) {
    const std::string content = raw.substr(seg.content_begin, seg.content_end - seg.content_begin);
    switch (seg.tag) {
      case Tag::Think:
        traj.steps.push_back(Step{content, std::nullopt, {}});
        break;
      case Tag::Search:
        if (traj.steps.empty() || traj.steps.back().search_query.has_value())
          traj.steps.push_back(Step{"", std::nullopt, {}});
        traj.steps.back().search_query = content;
        break;
      case Tag::Information: {
        if (traj.steps.empty() || !traj.steps.back().search_query.has_value())
          throw TrajectoryParseError(
              TrajectoryParseError::Kind::InformationWithoutSearch, seg.open_pos, "information",
              "information block at offset " + std::to_string(seg.open_pos) +
                  " has no preceding search");
        auto passages = parse_passages(content);
        auto& dst = traj.steps.back().retrieved;
        dst.insert(dst.end(), passages.begin(), passages.end());
        break;
      }
      case Tag::Answer:
        if (traj.answer.has_value())
          throw TrajectoryParseError(TrajectoryParseError::Kind::MultipleAnswers, seg.open_pos,
                                     "answer",
                                     "second answer tag at offset " + std::to_string(seg.open_pos));
        traj.answer = content;
        break;
    }
  }
  return traj;
}

std::string render(const Trajectory& traj) {
  std::string out;
  for (const auto& step : traj.steps) {
    if (!step.retrieved.empty() && !step.search_query.has_value())
      throw std::invalid_argument("trajectory: retrieved passages without a search query");
    out += "<think>" + step.think + "</think>\n";
    if (step.search_query.has_value())
      out += "<search>" + *step.search_query + "</search>\n";
    if (!step.retrieved.empty()) {
      out += "<information>";
      for (size_t i = 0; i < step.retrieved.size(); ++i) {
        if (i) out.push_back('\n');
        const Passage& p = step.retrieved[i];
        if (p.doc_id.empty())
          out += p.text;
        else
          out += "[" + p.doc_id + "] " + p.text;
      }
      out += "</information>\n";
    }
  }
  if (traj.answer.has_value()) out += "<answer>" + *traj.answer + "</answer>\n";
  return out;
}

const std::string& step_text(const Trajectory& traj, size_t i) {
  if (i < 1 || i > traj.steps.size())
    throw std::out_of_range("trajectory: step index " + std::to_string(i) + " out of range [1, " +
                            std::to_string(traj.steps.size()) + "]");
  return traj.steps[i - 1].think;
}

int search_calls(const Trajectory& traj) {
  int n = 0;
  for (const auto& step : traj.steps)
    if (step.search_query.has_value()) ++n;
  return n;
}

int response_length(const Trajectory& traj) {
  size_t n = 0;
  for (const auto& step : traj.steps) {
    n += tokenize(step.think).size();
    if (step.search_query.has_value()) n += tokenize(*step.search_query).size();
  }
  if (traj.answer.has_value()) n += tokenize(*traj.answer).size();
  return static_cast<int>(n);
}

std::vector<CharSpan> generated_char_spans(const std::string& raw) {
  const std::vector<Segment> segs = scan_segments(raw);

  std::vector<CharSpan> blocked;
  for (const auto& seg : segs) {
    blocked.push_back({seg.open_pos, seg.content_begin});
    if (seg.tag == Tag::Information) blocked.push_back({seg.content_begin, seg.content_end});
    blocked.push_back({seg.content_end, seg.close_end});
  }
  std::sort(blocked.begin(), blocked.end(),
            [](const CharSpan& a, const CharSpan& b) { return a.begin < b.begin; });

  std::vector<CharSpan> out;
  size_t cursor = 0;
  for (const auto& b : blocked) {
    if (b.begin > cursor) out.push_back({cursor, b.begin});
    cursor = std::max(cursor, b.end);
  }
  if (cursor < raw.size()) out.push_back({cursor, raw.size()});
  return out;
}

}  // namespace birar
