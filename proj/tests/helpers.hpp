#pragma once

#include "birar/lm_provider.hpp"
#include "birar/retrieval.hpp"
#include "birar/rng.hpp"
#include "birar/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace birar::testing {

// Fixture provider: bit costs looked up from a table keyed on rendered
// (target, context1, context2). Empty targets cost 0 like every provider.
class MockProvider : public LmProvider {
 public:
  void set(const std::string& target, const std::string& c1, const std::string& c2,
           double bits) {
    table_[{target, c1, c2}] = bits;
  }

  BitCost cond_bits(const TokenSeq& target, const TokenSeq& context) const override {
    return lookup(target, context, {});
  }
  BitCost cond_bits_joint(const TokenSeq& target, const TokenSeq& c1,
                          const TokenSeq& c2) const override {
    return lookup(target, c1, c2);
  }

 private:
  BitCost lookup(const TokenSeq& target, const TokenSeq& c1, const TokenSeq& c2) const {
    if (target.empty()) return 0.0;
    const auto key = std::make_tuple(render_tokens(target), render_tokens(c1), render_tokens(c2));
    const auto it = table_.find(key);
    if (it == table_.end())
      throw std::logic_error("mock provider: no fixture for K(" + std::get<0>(key) + " | " +
                             std::get<1>(key) + ", " + std::get<2>(key) + ")");
    return it->second;
  }

  std::map<std::tuple<std::string, std::string, std::string>, double> table_;
};

// Independent BM25 oracle: rescans the corpus per query, no inverted index.
inline std::vector<SearchResult> brute_force_bm25(const Corpus& corpus, const std::string& query,
                                                  int k, double k1 = 1.2, double b = 0.75) {
  const size_t n = corpus.documents.size();
  std::vector<TokenSeq> docs(n);
  double total_len = 0.0;
  for (size_t d = 0; d < n; ++d) {
    docs[d] = tokenize(corpus.documents[d].title + " " + corpus.documents[d].text);
    total_len += static_cast<double>(docs[d].size());
  }
  const double avg_len = total_len / static_cast<double>(n);

  std::vector<SearchResult> results;
  for (size_t d = 0; d < n; ++d) {
    double score = 0.0;
    bool any = false;
    for (const auto& term : tokenize(query)) {
      size_t tf = 0;
      for (const auto& tok : docs[d])
        if (tok == term) ++tf;
      if (tf == 0) continue;
      size_t df = 0;
      for (size_t e = 0; e < n; ++e) {
        for (const auto& tok : docs[e]) {
          if (tok == term) {
            ++df;
            break;
          }
        }
      }
      const double idf = std::log((static_cast<double>(n) - static_cast<double>(df) + 0.5) /
                                      (static_cast<double>(df) + 0.5) +
                                  1.0);
      const double len_norm =
          k1 * (1.0 - b + b * static_cast<double>(docs[d].size()) / avg_len);
      score += idf * static_cast<double>(tf) * (k1 + 1.0) / (static_cast<double>(tf) + len_norm);
      any = true;
    }
    if (any) results.push_back({corpus.documents[d].id, score});
  }
  std::sort(results.begin(), results.end(), [](const SearchResult& a, const SearchResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (results.size() > static_cast<size_t>(k)) results.resize(static_cast<size_t>(k));
  return results;
}

inline Corpus random_corpus(uint64_t seed, size_t n_docs, size_t words_per_doc) {
  static const std::vector<std::string> vocab = {
      "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",  "hotel",
      "india", "juliet", "kilo",   "lima",  "mike", "november", "oscar", "papa"};
  Rng rng(seed);
  Corpus corpus;
  for (size_t d = 0; d < n_docs; ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    doc.title = vocab[rng.below(vocab.size())];
    // variable length so the length normalization actually matters
    const size_t len = 1 + rng.below(words_per_doc);
    for (size_t w = 0; w < len; ++w) {
      if (w) doc.text.push_back(' ');
      doc.text += vocab[rng.below(vocab.size())];
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

inline std::string random_query(Rng& rng, size_t max_terms = 3) {
  static const std::vector<std::string> vocab = {
      "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",  "hotel",
      "india", "juliet", "kilo",   "lima",  "mike", "november", "oscar", "papa"};
  std::string query;
  const size_t n = 1 + rng.below(max_terms);
  for (size_t i = 0; i < n; ++i) {
    if (i) query.push_back(' ');
    query += vocab[rng.below(vocab.size())];
  }
  return query;
}

// Unique scratch directory under the build tree, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("birar_test_" + name + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::filesystem::path path() const { return path_; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("test helper: cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace birar::testing
