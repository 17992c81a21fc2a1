#include "birar/retrieval.hpp"

#include "birar/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace birar {

namespace {

constexpr char kMagic[8] = {'B', 'I', 'R', 'A', 'R', 'I', 'D', 'X'};
constexpr uint32_t kIndexVersion = 1;

void validate_corpus(const Corpus& corpus) {
  if (corpus.documents.empty())
    throw RetrievalError(RetrievalError::Kind::EmptyCorpus, "corpus has no documents");
  std::set<std::string> seen;
  for (const auto& doc : corpus.documents) {
    if (!seen.insert(doc.id).second)
      throw RetrievalError(RetrievalError::Kind::DuplicateDocId,
                           "duplicate doc_id '" + doc.id + "'");
    if (doc.text.empty())
      throw RetrievalError(RetrievalError::Kind::EmptyDocText,
                           "document '" + doc.id + "' has empty text");
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in)
    throw RetrievalError(RetrievalError::Kind::CorruptFile,
                         "corrupt index file (unexpected end of data)");
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<uint64_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  uint64_t n = 0;
  read_pod(in, n);
  if (n > (1ull << 32))
    throw RetrievalError(RetrievalError::Kind::CorruptFile, "corrupt index file (string length)");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in)
    throw RetrievalError(RetrievalError::Kind::CorruptFile,
                         "corrupt index file (unexpected end of data)");
  return s;
}

}  // namespace

Corpus load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RetrievalError(RetrievalError::Kind::Io, "cannot open corpus file " + path);
  Corpus corpus;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object() || !obj.contains("id") || !obj.contains("text"))
      throw RetrievalError(RetrievalError::Kind::Io,
                           "bad corpus line " + std::to_string(lineno) + " in " + path);
    Document doc;
    doc.id = obj["id"].get<std::string>();
    doc.title = obj.value("title", std::string{});
    doc.text = obj["text"].get<std::string>();
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

void save_corpus_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw RetrievalError(RetrievalError::Kind::Io, "cannot write corpus file " + path);
  for (const auto& doc : corpus.documents) {
    nlohmann::json obj = {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}};
    out << obj.dump() << "\n";
  }
}

Bm25Index Bm25Index::build(const Corpus& corpus, double k1, double b) {
  validate_corpus(corpus);
  if (!(k1 > 0.0)) throw std::invalid_argument("retrieval: k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw std::invalid_argument("retrieval: b must be in [0, 1]");

  Bm25Index index;
  index.k1_ = k1;
  index.b_ = b;

  // term -> doc_id -> tf, ordered so the final layout is deterministic.
  std::map<std::string, std::map<std::string, uint32_t>> table;
  std::unordered_map<std::string, uint32_t> doc_ordinal;

  uint64_t total_len = 0;
  for (const auto& doc : corpus.documents) {
    doc_ordinal[doc.id] = static_cast<uint32_t>(index.doc_ids_.size());
    index.doc_ids_.push_back(doc.id);
    const TokenSeq tokens = tokenize(doc.title + " " + doc.text);
    index.doc_lens_.push_back(static_cast<uint32_t>(tokens.size()));
    total_len += tokens.size();
    for (const auto& tok : tokens) ++table[tok][doc.id];
  }
  index.avg_len_ = static_cast<double>(total_len) / static_cast<double>(index.doc_ids_.size());

  index.terms_.reserve(table.size());
  index.postings_.reserve(table.size());
  for (const auto& [term, docs] : table) {
    index.terms_.push_back(term);
    std::vector<Posting> plist;
    plist.reserve(docs.size());
    for (const auto& [doc_id, tf] : docs) plist.push_back({doc_ordinal.at(doc_id), tf});
    index.postings_.push_back(std::move(plist));
  }
  return index;
}

const std::vector<Bm25Index::Posting>* Bm25Index::find_postings(const std::string& term) const {
  const auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return nullptr;
  return &postings_[static_cast<size_t>(it - terms_.begin())];
}

double Bm25Index::idf(const std::string& term) const {
  const auto* plist = find_postings(term);
  if (!plist) return 0.0;
  const double n = static_cast<double>(doc_ids_.size());
  const double df = static_cast<double>(plist->size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

std::vector<SearchResult> Bm25Index::search(const std::string& query, int k) const {
  if (k < 1) throw std::invalid_argument("retrieval: k must be >= 1");
  const TokenSeq terms = tokenize(query);

  std::vector<double> scores(doc_ids_.size(), 0.0);
  std::vector<char> matched(doc_ids_.size(), 0);
  for (const auto& term : terms) {
    const auto* plist = find_postings(term);
    if (!plist) continue;
    const double idf_t = idf(term);
    for (const Posting& p : *plist) {
      const double tf = static_cast<double>(p.tf);
      const double len_norm =
          k1_ * (1.0 - b_ + b_ * static_cast<double>(doc_lens_[p.doc]) / avg_len_);
      scores[p.doc] += idf_t * tf * (k1_ + 1.0) / (tf + len_norm);
      matched[p.doc] = 1;
    }
  }

  std::vector<SearchResult> results;
  for (size_t d = 0; d < scores.size(); ++d)
    if (matched[d]) results.push_back({doc_ids_[d], scores[d]});
  std::sort(results.begin(), results.end(), [](const SearchResult& a, const SearchResult& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
  });
  if (results.size() > static_cast<size_t>(k)) results.resize(static_cast<size_t>(k));
  return results;
}

void Bm25Index::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RetrievalError(RetrievalError::Kind::Io, "cannot write index file " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kIndexVersion);
  write_pod(out, k1_);
  write_pod(out, b_);
  write_pod(out, avg_len_);
  write_pod(out, static_cast<uint64_t>(doc_ids_.size()));
  for (size_t i = 0; i < doc_ids_.size(); ++i) {
    write_string(out, doc_ids_[i]);
    write_pod(out, doc_lens_[i]);
  }
  write_pod(out, static_cast<uint64_t>(terms_.size()));
  for (size_t t = 0; t < terms_.size(); ++t) {
    write_string(out, terms_[t]);
    write_pod(out, static_cast<uint64_t>(postings_[t].size()));
    for (const Posting& p : postings_[t]) {
      write_pod(out, p.doc);
      write_pod(out, p.tf);
    }
  }
  if (!out) throw RetrievalError(RetrievalError::Kind::Io, "write failed for " + path);
}

Bm25Index Bm25Index::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RetrievalError(RetrievalError::Kind::Io, "cannot open index file " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw RetrievalError(RetrievalError::Kind::CorruptFile, "not an index file: " + path);
  uint32_t version = 0;
  read_pod(in, version);
  if (version != kIndexVersion)
    throw RetrievalError(RetrievalError::Kind::VersionMismatch,
                         "index version " + std::to_string(version) + " unsupported (want " +
                             std::to_string(kIndexVersion) + ")");
  Bm25Index index;
  read_pod(in, index.k1_);
  read_pod(in, index.b_);
  read_pod(in, index.avg_len_);
  uint64_t n_docs = 0;
  read_pod(in, n_docs);
  index.doc_ids_.reserve(n_docs);
  index.doc_lens_.reserve(n_docs);
  for (uint64_t i = 0; i < n_docs; ++i) {
    index.doc_ids_.push_back(read_string(in));
    uint32_t len = 0;
    read_pod(in, len);
    index.doc_lens_.push_back(len);
  }
  uint64_t n_terms = 0;
  read_pod(in, n_terms);
  index.terms_.reserve(n_terms);
  index.postings_.reserve(n_terms);
  for (uint64_t t = 0; t < n_terms; ++t) {
    index.terms_.push_back(read_string(in));
    uint64_t n_postings = 0;
    read_pod(in, n_postings);
    std::vector<Posting> plist;
    plist.reserve(n_postings);
    for (uint64_t p = 0; p < n_postings; ++p) {
      Posting post{};
      read_pod(in, post.doc);
      read_pod(in, post.tf);
      if (post.doc >= index.doc_ids_.size())
        throw RetrievalError(RetrievalError::Kind::CorruptFile,
                             "corrupt index file (posting doc out of range)");
      plist.push_back(post);
    }
    index.postings_.push_back(std::move(plist));
  }
  return index;
}

}  // namespace birar
