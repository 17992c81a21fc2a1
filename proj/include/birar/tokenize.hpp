#pragma once

#include <string>
#include <vector>

namespace birar {

// Lowercased token sequence. Unit of all probability, distance and index math.
using TokenSeq = std::vector<std::string>;

// Deterministic tokenizer: lowercase, punctuation treated as separators,
// split on whitespace. Empty input yields an empty sequence.
TokenSeq tokenize(const std::string& text);

// Joins tokens with single spaces. tokenize(render_tokens(t)) == t.
std::string render_tokens(const TokenSeq& tokens);

TokenSeq concat(const TokenSeq& a, const TokenSeq& b);

}  // namespace birar
