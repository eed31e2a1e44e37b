#pragma once

// Open-vocabulary sampling: lexemes from the LM at a temperature, with UNK
// draws spelled out by the speller from the LM hidden state.

#include <cstdint>
#include <string>
#include <vector>

#include "ovlm/lexicon.hpp"
#include "ovlm/models.hpp"

namespace ovlm {

struct GenerateOptions {
  std::size_t length = 100;  // tokens, EOS included
  double temperature = 0.75;
  std::uint64_t seed = 1;
  std::size_t max_spelling_length = 40;
  std::string novel_open = "[[";
  std::string novel_close = "]]";
};

struct GeneratedToken {
  LexemeId id = 0;
  std::string surface;  // "\n" for EOS
  bool novel = false;
  bool truncated = false;
};

struct Generation {
  std::vector<GeneratedToken> tokens;
  std::string text;
};

// Spellings are drawn from Rng(seed), so the first UNK spelling equals
// sample_spelling(speller, h, T, max, Rng(seed)); token draws use an
// independent stream derived from the same seed. Temperatures below 1e-6
// select the argmax. For the unit-level baselines the units are glued back
// into words.
Generation generate(const ModelBundle& models, const GenerateOptions& options);

// Renders tokens with spaces between words, newlines for EOS, and novel
// spans wrapped in the configured delimiters.
std::string render(const std::vector<GeneratedToken>& tokens, const GenerateOptions& options);

}  // namespace ovlm
