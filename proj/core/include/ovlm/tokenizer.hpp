#pragma once

// Reversible, language-agnostic tokenization. Every "weird" character
// (not a letter, mark, number or space) is split off from its neighbours;
// each inserted split is tagged with a merge symbol so detokenize() can
// undo exactly the splits tokenize() introduced.

#include <stdexcept>
#include <string>
#include <string_view>

namespace ovlm {

class TokenizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// U+21B9 LEFTWARDS ARROW TO BAR OVER RIGHTWARDS ARROW TO BAR
inline constexpr char32_t kDefaultMergeSymbol = U'↹';

struct TokenizerConfig {
  char32_t merge_symbol = kDefaultMergeSymbol;
};

class Tokenizer {
 public:
  // Throws std::invalid_argument if the merge symbol is not weird.
  explicit Tokenizer(TokenizerConfig config = {});

  // Input containing the merge symbol is rejected with TokenizeError,
  // since its occurrences could not be told apart from inserted ones.
  std::u32string tokenize(std::u32string_view text) const;
  std::u32string detokenize(std::u32string_view text) const;

  // UTF-8 convenience overloads.
  std::string tokenize(std::string_view utf8) const;
  std::string detokenize(std::string_view utf8) const;

  char32_t merge_symbol() const { return config_.merge_symbol; }

 private:
  TokenizerConfig config_;
};

}  // namespace ovlm
