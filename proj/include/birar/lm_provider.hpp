#pragma once

#include "birar/tokenize.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace birar {

// Bit-length approximation of Kolmogorov complexity: -log2 of a generation
// probability, summed over target tokens. Always >= 0.
using BitCost = double;

inline constexpr double kProbFloor = 1e-12;
inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<bos>";

struct ProviderError : std::runtime_error {
  enum class Kind { Transport, MalformedResponse, Config };
  ProviderError(Kind k, const std::string& msg)
      : std::runtime_error("lm_provider: " + msg), kind(k) {}
  Kind kind;
};

// Supplies conditional generation probabilities in bits. Implementations are
// immutable after construction and safe for concurrent read-only queries.
class LmProvider {
 public:
  virtual ~LmProvider() = default;

  // -log2 P(target | context) summed per target token. Empty target is exactly 0.
  virtual BitCost cond_bits(const TokenSeq& target, const TokenSeq& context) const = 0;

  // K(target | context1, context2): both contexts condition the target, joined
  // under the fixed conditioning template at the provider boundary.
  virtual BitCost cond_bits_joint(const TokenSeq& target, const TokenSeq& context1,
                                  const TokenSeq& context2) const = 0;
};

// Add-k smoothed n-gram model over BOS-padded sequences. The predicted-token
// vocabulary is the corpus vocabulary plus UNK; BOS appears only in histories.
// Immutable after train().
class NGramModel {
 public:
  static NGramModel train(const std::vector<TokenSeq>& corpus, int order, double k);

  // P(token | history), using the last order-1 history tokens. Unknown tokens
  // map to UNK on both sides. Always in (0, 1].
  double prob(const std::string& token, const TokenSeq& history) const;

  int order() const { return order_; }
  double smoothing_k() const { return k_; }
  // Sorted, includes UNK, excludes BOS.
  const std::vector<std::string>& vocab() const { return vocab_; }
  size_t vocab_index(const std::string& token) const;  // UNK index if absent

 private:
  NGramModel() = default;

  int order_ = 1;
  double k_ = 1.0;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, size_t> vocab_index_;
  // history key -> (token index -> count); totals kept separately.
  std::unordered_map<std::string, std::unordered_map<size_t, long long>> counts_;
  std::unordered_map<std::string, long long> history_totals_;

  std::string history_key(const TokenSeq& history) const;
};

// In-process provider over a trained NGramModel.
//
// cache_weight > 0 interpolates the frozen n-gram with a per-call unigram
// cache over the tokens already seen in (context + target prefix), so the
// conditional cost of a target genuinely drops when the context shares
// content with it. cache_weight = 0 is the plain n-gram.
class NGramProvider : public LmProvider {
 public:
  explicit NGramProvider(NGramModel model, double cache_weight = 0.0);

  BitCost cond_bits(const TokenSeq& target, const TokenSeq& context) const override;
  BitCost cond_bits_joint(const TokenSeq& target, const TokenSeq& context1,
                          const TokenSeq& context2) const override;

  const NGramModel& model() const { return model_; }
  double cache_weight() const { return cache_weight_; }

 private:
  NGramModel model_;
  double cache_weight_;
};

struct RemoteProviderConfig {
  std::string endpoint;        // e.g. http://host:port/v1/completions
  std::string model;
  std::string api_key;         // optional bearer token
  double timeout_seconds = 30.0;
  int max_retries = 2;
  int max_inflight = 8;

  // Reads BIRAR_LM_ENDPOINT, BIRAR_LM_API_KEY, BIRAR_LM_MODEL.
  static RemoteProviderConfig from_env();
};

// Conditioning template, bit-exact at the HTTP boundary:
//   CONTEXT:\n{context1}\n{context2}\nTARGET:\n
// with empty segments omitted (the CONTEXT header is dropped when both are empty).
std::string conditioning_prompt(const std::string& context1, const std::string& context2);

// Client for a completions-style endpoint returning per-token logprobs with
// echo. Natural-log logprobs are converted to bits; per-token probabilities
// are clamped to [kProbFloor, 1]. In-flight requests are bounded.
class RemoteProvider : public LmProvider {
 public:
  explicit RemoteProvider(RemoteProviderConfig config);
  ~RemoteProvider() override;

  BitCost cond_bits(const TokenSeq& target, const TokenSeq& context) const override;
  BitCost cond_bits_joint(const TokenSeq& target, const TokenSeq& context1,
                          const TokenSeq& context2) const override;

  const RemoteProviderConfig& config() const { return config_; }

 private:
  RemoteProviderConfig config_;
  struct Inflight;
  std::unique_ptr<Inflight> inflight_;

  BitCost bits_for_prompt(const std::string& prefix, const std::string& target_text) const;
};

}  // namespace birar
