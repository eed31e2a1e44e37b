#include "ovlm/tokenizer.hpp"

#include "ovlm/unicode.hpp"

namespace ovlm {

Tokenizer::Tokenizer(TokenizerConfig config) : config_(config) {
  if (!is_weird(config_.merge_symbol)) {
    throw std::invalid_argument("tokenizer: merge symbol must be a weird character");
  }
}

// The string boundaries behave like whitespace: no split is introduced
// before a weird first character or after a weird last character.
std::u32string Tokenizer::tokenize(std::u32string_view text) const {
  const char32_t merge = config_.merge_symbol;
  std::u32string out;
  out.reserve(text.size() + text.size() / 4);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char32_t c = text[i];
    if (c == merge) {
      throw TokenizeError("tokenizer: input contains the merge symbol at position " +
                          std::to_string(i));
    }
    if (!is_weird(c)) {
      out.push_back(c);
      continue;
    }
    if (i > 0 && !is_space(text[i - 1])) {
      out.push_back(U' ');
      out.push_back(merge);
    }
    out.push_back(c);
    if (i + 1 < text.size() && !is_space(text[i + 1]) && !is_weird(text[i + 1])) {
      out.push_back(merge);
      out.push_back(U' ');
    }
  }
  return out;
}

std::u32string Tokenizer::detokenize(std::u32string_view text) const {
  const char32_t merge = config_.merge_symbol;
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t c = text[i];
    const bool has_two_more = i + 2 < text.size();
    if (has_two_more && c == U' ' && text[i + 1] == merge && is_weird(text[i + 2])) {
      // undo a split on the left of a weird character
      i += 2;
    } else if (has_two_more && is_weird(c) && text[i + 1] == merge && text[i + 2] == U' ') {
      // undo a split on its right
      out.push_back(c);
      i += 3;
    } else {
      out.push_back(c);
      i += 1;
    }
  }
  return out;
}

std::string Tokenizer::tokenize(std::string_view utf8) const {
  return utf8_encode(tokenize(std::u32string_view(utf8_decode(utf8))));
}

std::string Tokenizer::detokenize(std::string_view utf8) const {
  return utf8_encode(detokenize(std::u32string_view(utf8_decode(utf8))));
}

}  // namespace ovlm
