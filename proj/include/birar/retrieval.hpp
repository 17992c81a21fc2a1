#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace birar {

struct Document {
  std::string id;
  std::string title;
  std::string text;
  friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
  std::vector<Document> documents;
};

struct SearchResult {
  std::string doc_id;
  double score;
  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

struct RetrievalError : std::runtime_error {
  enum class Kind { DuplicateDocId, EmptyCorpus, EmptyDocText, CorruptFile, VersionMismatch, Io };
  RetrievalError(Kind k, const std::string& msg)
      : std::runtime_error("retrieval: " + msg), kind(k) {}
  Kind kind;
};

// One JSON object per line: {"id", "title", "text"}.
Corpus load_corpus_jsonl(const std::string& path);
void save_corpus_jsonl(const Corpus& corpus, const std::string& path);

// Immutable BM25 inverted index over tokenized title+text. Scores use the
// Robertson/Sparck-Jones idf with +1 inside the log, which is non-negative
// even on tiny corpora.
class Bm25Index {
 public:
  static constexpr double kDefaultK1 = 1.2;
  static constexpr double kDefaultB = 0.75;

  static Bm25Index build(const Corpus& corpus, double k1 = kDefaultK1, double b = kDefaultB);

  // Top-k by descending score, ties broken by ascending doc_id. Documents
  // sharing no query term are omitted.
  std::vector<SearchResult> search(const std::string& query, int k) const;

  // Versioned binary format; load(save(x)) reproduces x's results bit-exactly.
  void save(const std::string& path) const;
  static Bm25Index load(const std::string& path);

  size_t doc_count() const { return doc_ids_.size(); }
  double avg_doc_len() const { return avg_len_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  // Non-negative idf; 0 for unseen terms.
  double idf(const std::string& term) const;

 private:
  Bm25Index() = default;

  struct Posting {
    uint32_t doc;  // ordinal into doc_ids_
    uint32_t tf;
  };

  std::vector<std::string> doc_ids_;  // corpus order
  std::vector<uint32_t> doc_lens_;
  double avg_len_ = 0.0;
  double k1_ = kDefaultK1;
  double b_ = kDefaultB;
  std::vector<std::string> terms_;               // sorted
  std::vector<std::vector<Posting>> postings_;   // parallel to terms_, sorted by doc_id

  const std::vector<Posting>* find_postings(const std::string& term) const;
};

}  // namespace birar
