#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ovlm {

class Utf8Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Strict UTF-8 decoding; throws Utf8Error on malformed input or surrogates.
std::u32string utf8_decode(std::string_view text);
std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t c);

// Number of code points in valid UTF-8 text.
std::size_t utf8_length(std::string_view text);

// Unicode White_Space plus the C0 separators U+001C..U+001F: the set of
// characters Python's str.isspace() accepts.
bool is_space(char32_t c);

// True iff the general category does not start with L, M or N and the
// character is not a space.
bool is_weird(char32_t c);

}  // namespace ovlm
