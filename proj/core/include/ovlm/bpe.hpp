#pragma once

// Byte pair encoding over whitespace-separated tokens.
//
// A word starts as its characters followed by a separate end-of-word
// marker symbol; merges are learned on the word list weighted by token
// frequency. In segmenter output a marker that is still a unit of its own
// is glued onto the preceding unit, so every word ends in a unit carrying
// the marker suffix.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ovlm/lexicon.hpp"

namespace ovlm {

inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::size_t kDefaultBpeMerges = 40000;

class MergeTable {
 public:
  using Pair = std::pair<std::string, std::string>;

  MergeTable() = default;
  explicit MergeTable(std::vector<Pair> merges);

  const std::vector<Pair>& merges() const { return merges_; }
  std::size_t size() const { return merges_.size(); }
  // Priority of a pair (0 is applied first), or -1 if not a merge.
  std::int64_t rank(std::string_view left, std::string_view right) const;

  // "#ovlm-bpe v1" header, then `left right` per line in priority order.
  void write(std::ostream& out) const;
  static MergeTable read(std::istream& in);

 private:
  std::vector<Pair> merges_;
  std::unordered_map<std::string, std::int64_t> ranks_;  // key: left + '\x1f' + right
};

struct LearnResult {
  MergeTable table;
  bool exhausted = false;  // fewer merges than requested were possible
};

// Most frequent adjacent pair first; equal counts go to the
// lexicographically smaller (left, right) pair.
LearnResult learn_merges(std::string_view corpus, std::size_t num_merges);
LearnResult learn_merges(const std::unordered_map<std::string, std::uint64_t>& word_freq,
                         std::size_t num_merges);

// Canonical segmentation of one word.
std::vector<std::string> segment_word(std::string_view word, const MergeTable& table);

// Joins units and strips the end-of-word marker.
std::string join_units(const std::vector<std::string>& units);

// A corpus rewritten as subword units. EOS stays a special unit.
struct SegmentedCorpus {
  EncodedCorpus units;
  // For each original token (including EOS), the half-open range of its
  // units in `units`.
  std::vector<std::pair<std::size_t, std::size_t>> token_spans;
  std::vector<std::string> token_surface;
};

// Closed unit vocabulary: every training character c and c + marker, every
// merged symbol and its marker-suffixed form, each with its training count.
Lexicon build_unit_vocab(std::string_view train_corpus, const MergeTable& table);

SegmentedCorpus segment_corpus(std::string_view corpus, const MergeTable& table,
                               const Lexicon& unit_vocab,
                               std::optional<std::string_view> raw = std::nullopt);

// Character units for the pure character-level baseline. Each word token
// becomes its characters followed by a separator unit; EOS stays EOS.
inline constexpr std::string_view kCharSeparator = " ";

Lexicon build_char_vocab(std::string_view train_corpus);
SegmentedCorpus segment_chars(std::string_view corpus, const Lexicon& char_vocab,
                              std::optional<std::string_view> raw = std::nullopt);

}  // namespace ovlm
