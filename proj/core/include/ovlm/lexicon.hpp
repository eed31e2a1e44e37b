#pragma once

// The finite vocabulary of lexemes and corpora encoded against it.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ovlm {

using LexemeId = std::int64_t;

inline constexpr LexemeId kUnkId = 0;
inline constexpr LexemeId kEosId = 1;
inline constexpr std::size_t kNumSpecialLexemes = 2;
inline constexpr std::size_t kDefaultVocabSize = 60000;

struct LexiconEntry {
  LexemeId id = 0;
  std::string spelling;  // empty for UNK and EOS
  std::uint64_t count = 0;
};

// Lexemes sorted by descending training count, ties broken by spelling
// (code point order, which equals UTF-8 byte order). Ids 0 and 1 are UNK
// and EOS. The lexicon also remembers the training count of every type,
// including those cut off by the size limit, for frequency binning.
class Lexicon {
 public:
  Lexicon() = default;

  // `tokens` are word tokens (no line breaks); `lines` is the EOS count.
  static Lexicon build(std::span<const std::string> tokens, std::size_t max_types,
                       std::uint64_t lines = 0);
  static Lexicon from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                             std::size_t max_types, std::uint64_t lines = 0);

  std::size_t size() const { return entries_.size(); }
  // Number of spelled (non-special) lexemes.
  std::size_t num_words() const { return entries_.size() - kNumSpecialLexemes; }
  LexemeId unk_id() const { return kUnkId; }
  LexemeId eos_id() const { return kEosId; }
  static bool is_special(LexemeId id) { return id == kUnkId || id == kEosId; }

  // Lexeme id of a spelling, or UNK when out of vocabulary.
  LexemeId lookup(std::string_view spelling) const;
  bool contains(std::string_view spelling) const;
  const std::string& spelling(LexemeId id) const;
  std::uint64_t count(LexemeId id) const;
  const std::vector<LexiconEntry>& entries() const { return entries_; }

  // Training count of any type, 0 if never seen.
  std::uint64_t type_count(std::string_view spelling) const;
  std::size_t distinct_train_types() const { return type_counts_.size(); }
  const std::unordered_map<std::string, std::uint64_t>& type_counts() const {
    return type_counts_;
  }

  // True when more lexemes were requested than distinct types exist.
  bool size_request_exceeded() const { return size_request_exceeded_; }

  // `id<TAB>spelling<TAB>count` per lexeme, specials first.
  void write_vocab(std::ostream& out) const;
  // `spelling<TAB>count` per training type, sorted like the lexicon.
  void write_type_counts(std::ostream& out) const;
  static Lexicon read(std::istream& vocab, std::istream* type_counts = nullptr);

 private:
  void index();

  std::vector<LexiconEntry> entries_;
  std::unordered_map<std::string, LexemeId> by_spelling_;
  std::unordered_map<std::string, std::uint64_t> type_counts_;
  bool size_request_exceeded_ = false;
};

// Whitespace-split word tokens of one line.
std::vector<std::string> split_tokens(std::string_view line);

// All word tokens of a newline-delimited text and its line count.
struct TokenCounts {
  std::vector<std::string> tokens;
  std::uint64_t lines = 0;
};
TokenCounts collect_tokens(std::string_view text);

inline constexpr std::string_view kEosSurface = "\n";

struct EncodedCorpus {
  std::vector<LexemeId> ids;
  std::vector<std::string> surface;  // kEosSurface for line breaks
  std::size_t char_count_original = 0;

  std::size_t size() const { return ids.size(); }
};

// Maps each token to its lexeme id or UNK and each line break to EOS.
// The character count is taken from `raw` when given (the untokenized
// text), else from `tokenized` itself; both count code points including
// spaces and newlines.
EncodedCorpus encode_corpus(std::string_view tokenized, const Lexicon& lexicon,
                            std::optional<std::string_view> raw = std::nullopt);

// Inverse of encode_corpus up to whitespace normalization: tokens joined by
// single spaces, each EOS rendered as a newline.
std::string decode_corpus(const EncodedCorpus& corpus, const Lexicon& lexicon);

enum class FrequencyBin : std::size_t { kUnseen = 0, kRare = 1, kFrequent = 2 };
inline constexpr std::size_t kNumFrequencyBins = 3;
inline constexpr std::uint64_t kFrequentThreshold = 100;

FrequencyBin frequency_bin_for(std::uint64_t train_count);

// Token positions per bin {0, [1,100), [100,inf)} by the type's training
// count. EOS tokens are not binned.
struct BinnedPositions {
  std::array<std::vector<std::size_t>, kNumFrequencyBins> positions;
  std::size_t total() const;
};
BinnedPositions frequency_bin(const Lexicon& lexicon, const EncodedCorpus& corpus);

// Character n-gram frequencies counted per token (each word weighted by
// its frequency) and per type (each distinct word once).
struct NgramRank {
  std::string ngram;
  std::uint64_t count = 0;
  std::size_t rank = 0;  // 1-based
};

struct NgramRankReport {
  std::vector<NgramRank> by_token;
  std::vector<NgramRank> by_type;

  std::optional<NgramRank> token_rank(std::string_view ngram) const;
  std::optional<NgramRank> type_rank(std::string_view ngram) const;
};

// With `pad_words`, each word is surrounded by one space on either side
// before n-grams are extracted.
NgramRankReport ngram_rank_report(std::string_view corpus, std::size_t n,
                                  bool pad_words = false);

}  // namespace ovlm
