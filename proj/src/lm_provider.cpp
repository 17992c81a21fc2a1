#include "birar/lm_provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <semaphore>
#include <set>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace birar {

namespace {

constexpr char kHistorySep = '\x1f';

double clamp_prob(double p) {
  if (!(p > kProbFloor)) return kProbFloor;
  if (p > 1.0) return 1.0;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// NGramModel

NGramModel NGramModel::train(const std::vector<TokenSeq>& corpus, int order, double k) {
  if (corpus.empty()) throw std::invalid_argument("lm_provider: empty training corpus");
  if (order < 1) throw std::invalid_argument("lm_provider: n-gram order must be >= 1");
  if (!(k > 0.0)) throw std::invalid_argument("lm_provider: smoothing k must be > 0");

  NGramModel m;
  m.order_ = order;
  m.k_ = k;

  std::set<std::string> vocab_set;
  for (const auto& seq : corpus)
    for (const auto& tok : seq) vocab_set.insert(tok);
  vocab_set.insert(kUnkToken);
  m.vocab_.assign(vocab_set.begin(), vocab_set.end());
  for (size_t i = 0; i < m.vocab_.size(); ++i) m.vocab_index_[m.vocab_[i]] = i;

  const size_t ctx = static_cast<size_t>(order - 1);
  for (const auto& seq : corpus) {
    TokenSeq padded(ctx, kBosToken);
    padded.insert(padded.end(), seq.begin(), seq.end());
    for (size_t i = ctx; i < padded.size(); ++i) {
      TokenSeq hist(padded.begin() + static_cast<long>(i - ctx),
                    padded.begin() + static_cast<long>(i));
      const std::string key = m.history_key(hist);
      const size_t tok = m.vocab_index_.at(padded[i]);
      ++m.counts_[key][tok];
      ++m.history_totals_[key];
    }
  }
  return m;
}

size_t NGramModel::vocab_index(const std::string& token) const {
  auto it = vocab_index_.find(token);
  if (it != vocab_index_.end()) return it->second;
  return vocab_index_.at(kUnkToken);
}

std::string NGramModel::history_key(const TokenSeq& history) const {
  const size_t ctx = static_cast<size_t>(order_ - 1);
  const size_t start = history.size() > ctx ? history.size() - ctx : 0;
  std::string key;
  for (size_t i = start; i < history.size(); ++i) {
    const std::string& raw = history[i];
    if (!key.empty() || i > start) key.push_back(kHistorySep);
    if (raw == kBosToken) {
      key += kBosToken;
    } else {
      key += vocab_[vocab_index(raw)];
    }
  }
  return key;
}

double NGramModel::prob(const std::string& token, const TokenSeq& history) const {
  const std::string key = history_key(history);
  const size_t tok = vocab_index(token);
  long long c = 0;
  long long total = 0;
  auto ht = history_totals_.find(key);
  if (ht != history_totals_.end()) {
    total = ht->second;
    const auto& row = counts_.at(key);
    auto ct = row.find(tok);
    if (ct != row.end()) c = ct->second;
  }
  return (static_cast<double>(c) + k_) /
         (static_cast<double>(total) + k_ * static_cast<double>(vocab_.size()));
}

// ---------------------------------------------------------------------------
// NGramProvider

NGramProvider::NGramProvider(NGramModel model, double cache_weight)
    : model_(std::move(model)), cache_weight_(cache_weight) {
  if (cache_weight_ < 0.0 || cache_weight_ >= 1.0)
    throw std::invalid_argument("lm_provider: cache weight must be in [0, 1)");
}

BitCost NGramProvider::cond_bits(const TokenSeq& target, const TokenSeq& context) const {
  if (target.empty()) return 0.0;

  const int order = model_.order();
  const size_t ctx = static_cast<size_t>(order - 1);
  const double k = model_.smoothing_k();
  const double vocab_size = static_cast<double>(model_.vocab().size());

  TokenSeq hist(ctx, kBosToken);
  std::unordered_map<size_t, long long> cache;
  long long cache_total = 0;

  auto advance = [&](const std::string& raw) {
    if (ctx > 0) {
      hist.erase(hist.begin());
      hist.push_back(raw);
    }
    if (cache_weight_ > 0.0) {
      ++cache[model_.vocab_index(raw)];
      ++cache_total;
    }
  };

  for (const auto& tok : context) advance(tok);

  double bits = 0.0;
  for (const auto& tok : target) {
    double p = model_.prob(tok, hist);
    if (cache_weight_ > 0.0) {
      long long c = 0;
      auto it = cache.find(model_.vocab_index(tok));
      if (it != cache.end()) c = it->second;
      const double pc = (static_cast<double>(c) + k) /
                        (static_cast<double>(cache_total) + k * vocab_size);
      p = (1.0 - cache_weight_) * p + cache_weight_ * pc;
    }
    bits += -std::log2(clamp_prob(p));
    advance(tok);
  }
  return bits;
}

BitCost NGramProvider::cond_bits_joint(const TokenSeq& target, const TokenSeq& context1,
                                       const TokenSeq& context2) const {
  // The template's separator is a newline, which tokenizes away; in process
  // the joint context is the plain concatenation.
  return cond_bits(target, concat(context1, context2));
}

// ---------------------------------------------------------------------------
// Conditioning template

std::string conditioning_prompt(const std::string& context1, const std::string& context2) {
  std::string out;
  if (!context1.empty() || !context2.empty()) {
    out += "CONTEXT:\n";
    if (!context1.empty()) {
      out += context1;
      out.push_back('\n');
    }
    if (!context2.empty()) {
      out += context2;
      out.push_back('\n');
    }
  }
  out += "TARGET:\n";
  return out;
}

// ---------------------------------------------------------------------------
// RemoteProvider

RemoteProviderConfig RemoteProviderConfig::from_env() {
  RemoteProviderConfig cfg;
  if (const char* e = std::getenv("BIRAR_LM_ENDPOINT")) cfg.endpoint = e;
  if (const char* e = std::getenv("BIRAR_LM_API_KEY")) cfg.api_key = e;
  if (const char* e = std::getenv("BIRAR_LM_MODEL")) cfg.model = e;
  return cfg;
}

struct RemoteProvider::Inflight {
  explicit Inflight(int limit) : sem(limit) {}
  std::counting_semaphore<1024> sem;
};

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;  // starts with '/'
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ProviderError(ProviderError::Kind::Config, "endpoint URL missing scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

RemoteProvider::RemoteProvider(RemoteProviderConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty())
    throw ProviderError(ProviderError::Kind::Config, "remote endpoint not configured");
  if (!(config_.timeout_seconds > 0.0))
    throw ProviderError(ProviderError::Kind::Config, "timeout must be > 0");
  if (config_.max_retries < 0)
    throw ProviderError(ProviderError::Kind::Config, "max retries must be >= 0");
  if (config_.max_inflight < 1 || config_.max_inflight > 1024)
    throw ProviderError(ProviderError::Kind::Config, "max inflight must be in [1, 1024]");
  inflight_ = std::make_unique<Inflight>(config_.max_inflight);
}

RemoteProvider::~RemoteProvider() = default;

BitCost RemoteProvider::cond_bits(const TokenSeq& target, const TokenSeq& context) const {
  if (target.empty()) return 0.0;
  return bits_for_prompt(conditioning_prompt(render_tokens(context), ""), render_tokens(target));
}

BitCost RemoteProvider::cond_bits_joint(const TokenSeq& target, const TokenSeq& context1,
                                        const TokenSeq& context2) const {
  if (target.empty()) return 0.0;
  return bits_for_prompt(conditioning_prompt(render_tokens(context1), render_tokens(context2)),
                         render_tokens(target));
}

BitCost RemoteProvider::bits_for_prompt(const std::string& prefix,
                                        const std::string& target_text) const {
  const ParsedUrl url = parse_url(config_.endpoint);
  const std::string prompt = prefix + target_text;

  nlohmann::json body = {
      {"model", config_.model}, {"prompt", prompt},   {"max_tokens", 0},
      {"echo", true},           {"logprobs", 0},
  };
  const std::string payload = body.dump();

  inflight_->sem.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{inflight_->sem};

  httplib::Result res;
  std::string transport_detail = "no response";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    httplib::Client client(url.base);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs =
        static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    res = client.Post(url.path, headers, payload, "application/json");
    if (res && res->status < 500) break;
    if (res) transport_detail = "server status " + std::to_string(res->status);
  }
  if (!res || res->status >= 500)
    throw ProviderError(ProviderError::Kind::Transport,
                        "request to " + config_.endpoint + " failed after " +
                            std::to_string(config_.max_retries + 1) + " attempts (" +
                            transport_detail + ")");
  if (res->status != 200)
    throw ProviderError(ProviderError::Kind::MalformedResponse,
                        "endpoint rejected request with status " + std::to_string(res->status));

  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded())
    throw ProviderError(ProviderError::Kind::MalformedResponse, "response is not valid JSON");

  const auto bad = [&](const std::string& what) {
    return ProviderError(ProviderError::Kind::MalformedResponse, "response missing " + what);
  };
  if (!reply.contains("choices") || !reply["choices"].is_array() || reply["choices"].empty())
    throw bad("choices[0]");
  const auto& choice = reply["choices"][0];
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) throw bad("logprobs");
  const auto& lp = choice["logprobs"];
  if (!lp.contains("token_logprobs") || !lp["token_logprobs"].is_array())
    throw bad("token_logprobs");
  if (!lp.contains("text_offset") || !lp["text_offset"].is_array()) throw bad("text_offset");
  const auto& logprobs = lp["token_logprobs"];
  const auto& offsets = lp["text_offset"];
  if (logprobs.size() != offsets.size())
    throw ProviderError(ProviderError::Kind::MalformedResponse,
                        "token_logprobs and text_offset lengths differ");

  const auto target_start = static_cast<long long>(prefix.size());
  const double min_logprob_bits = -std::log2(kProbFloor);
  double bits = 0.0;
  for (size_t i = 0; i < logprobs.size(); ++i) {
    if (!offsets[i].is_number_integer()) throw bad("integer text_offset");
    if (offsets[i].get<long long>() < target_start) continue;
    if (logprobs[i].is_null()) {
      bits += min_logprob_bits;
      continue;
    }
    if (!logprobs[i].is_number())
      throw bad("numeric token_logprobs entry");
    // Natural-log logprob from the endpoint; bits are canonical internally.
    const double p = clamp_prob(std::exp(logprobs[i].get<double>()));
    bits += -std::log2(p);
  }
  return bits;
}

}  // namespace birar
