#pragma once

#include "birar/lm_provider.hpp"
#include "birar/synthenv.hpp"

namespace birar {

// Training sequences for the world's frozen scoring model: the corpus
// documents plus the question texts and the reasoning phrasebook, so template
// words are in-vocabulary and distances are driven by content tokens.
std::vector<TokenSeq> provider_corpus(const World& world);

// Frozen n-gram scoring provider for a world. cache_weight > 0 enables the
// context cache that makes conditional costs context-sensitive.
NGramProvider make_world_provider(const World& world, int order = 2, double k = 0.25,
                                  double cache_weight = 0.3);

}  // namespace birar
