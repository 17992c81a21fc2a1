#include "birar/world_provider.hpp"

namespace birar {

std::vector<TokenSeq> provider_corpus(const World& world) {
  std::vector<TokenSeq> corpus;
  corpus.reserve(world.corpus.documents.size() + world.questions.size() +
                 world.relations.size() + 1);
  for (const Document& doc : world.corpus.documents)
    corpus.push_back(tokenize(doc.title + " " + doc.text));
  for (const WorldQuestion& q : world.questions) corpus.push_back(tokenize(q.text));
  for (const std::string& rel : world.relations)
    corpus.push_back(tokenize("I should look up the " + rel + " of"));
  corpus.push_back(tokenize("The answer is"));
  return corpus;
}

NGramProvider make_world_provider(const World& world, int order, double k, double cache_weight) {
  return NGramProvider(NGramModel::train(provider_corpus(world), order, k), cache_weight);
}

}  // namespace birar
