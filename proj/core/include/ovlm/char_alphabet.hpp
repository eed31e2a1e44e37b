#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ovlm {

// U+25C7 WHITE DIAMOND stands in for every rare character.
inline constexpr char32_t kRareCharSymbol = U'◇';
inline constexpr std::size_t kDefaultRareCharThreshold = 25;

// Characters seen at least `threshold` times in training. Newline is
// always kept so that line structure survives normalization.
class CharAlphabet {
 public:
  CharAlphabet() = default;
  CharAlphabet(std::map<char32_t, std::uint64_t> train_counts, std::size_t threshold,
               char32_t replacement = kRareCharSymbol);

  bool contains(char32_t c) const { return kept_.count(c) > 0; }
  const std::set<char32_t>& kept() const { return kept_; }
  char32_t replacement() const { return replacement_; }
  std::size_t threshold() const { return threshold_; }
  std::uint64_t train_count(char32_t c) const;

  std::u32string normalize(std::u32string_view text) const;
  std::string normalize(std::string_view utf8) const;

  // `U+XXXX<TAB>count` per training character, preceded by a header line
  // with the threshold and replacement code point.
  void write(std::ostream& out) const;
  static CharAlphabet read(std::istream& in);

 private:
  std::map<char32_t, std::uint64_t> counts_;
  std::set<char32_t> kept_;
  std::size_t threshold_ = kDefaultRareCharThreshold;
  char32_t replacement_ = kRareCharSymbol;
};

struct NormalizedCorpora {
  std::string train;
  std::vector<std::string> others;
  CharAlphabet alphabet;
};

// Counts characters on the raw training text and replaces every character
// seen fewer than `threshold` times there by the replacement symbol, in the
// training text and all other corpora alike.
NormalizedCorpora normalize_rare_chars(std::string_view train,
                                       const std::vector<std::string>& others,
                                       std::size_t threshold = kDefaultRareCharThreshold);

}  // namespace ovlm
