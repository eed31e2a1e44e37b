#pragma once

// Character-level spelling model p_spell(spelling | conditioning vector).
//
// A stacked LSTM reads BOW followed by the spelling and predicts each next
// character and finally EOW. The conditioning vector (a lexeme embedding,
// or the lexeme-level hidden state for an UNK token) enters the first layer
// at every step through its own block of input weights; the four per-gate
// column blocks of that matrix carry the nuclear-norm penalty.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ovlm/checkpoint.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/lstm.hpp"
#include "ovlm/optim.hpp"
#include "ovlm/random.hpp"
#include "ovlm/tensor.hpp"

namespace ovlm {

enum class SpellerVariant { kFull, kUncond, kUnigram };

const char* to_string(SpellerVariant v);
SpellerVariant speller_variant_from_string(std::string_view s);

inline constexpr std::size_t kMaxTypeSpellingLength = 20;

// The alphabet Sigma. Input symbols are BOW (0) and the characters
// (1..|Sigma|); output symbols are the characters (0..|Sigma|-1) and EOW.
class SpellAlphabet {
 public:
  SpellAlphabet() = default;
  explicit SpellAlphabet(std::set<char32_t> chars);

  // All non-space characters of `text` plus the rare-character symbol.
  static SpellAlphabet from_text(std::string_view utf8);

  std::size_t size() const { return chars_.size(); }
  std::size_t input_symbols() const { return chars_.size() + 1; }
  std::size_t output_symbols() const { return chars_.size() + 1; }
  std::int64_t bow() const { return 0; }
  std::int64_t eow() const { return static_cast<std::int64_t>(chars_.size()); }

  bool contains(char32_t c) const;
  // Output index of a character; throws std::invalid_argument if absent.
  std::int64_t index(char32_t c) const;
  char32_t char_at(std::int64_t output_index) const { return chars_.at(output_index); }
  const std::vector<char32_t>& chars() const { return chars_; }

  // Replaces characters outside the alphabet by the rare-character symbol
  // (or throws if that symbol is absent too).
  std::u32string coerce(std::u32string_view s) const;

  std::string serialize() const;
  static SpellAlphabet deserialize(std::string_view s);

 private:
  std::vector<char32_t> chars_;
};

struct SpellerConfig {
  SpellerVariant variant = SpellerVariant::kFull;
  std::size_t cond_dim = 400;
  std::size_t char_emb_dim = 5;
  std::size_t hidden = 100;
  std::size_t layers = 3;
  double dropout = 0.2;
  double cond_dropout = 0.5;
  double nuclear_coef = 1.0;
  double weight_decay = 1.2e-6;
};

struct SampledSpelling {
  std::u32string spelling;
  bool truncated = false;
};

class Speller {
 public:
  Speller(SpellerConfig config, SpellAlphabet alphabet, Rng& init_rng,
          std::string name = "speller");

  const SpellerConfig& config() const { return config_; }
  const SpellAlphabet& alphabet() const { return alphabet_; }
  const std::string& name() const { return name_; }
  std::vector<Parameter>& parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }

  // Negative log-likelihood in nats summed over the words, each conditioned
  // on its row of `conds` (B x cond_dim; ignored by the unigram variant and
  // zeroed by the unconditioned one).
  Tensor nll(std::span<const std::u32string> spellings, const Tensor& conds,
             bool training, Rng& rng) const;

  // log p(spelling | cond), natural log, no dropout.
  double logprob(std::u32string_view spelling, std::span<const double> cond) const;

  // Next-symbol distribution over Sigma + EOW after BOW + prefix.
  std::vector<double> next_distribution(std::u32string_view prefix,
                                        std::span<const double> cond,
                                        double temperature = 1.0) const;

  // coef * sum over gates of the nuclear norm of the conditioning block.
  Tensor nuclear_penalty() const;

  // Per-gate conditioning blocks (cond_dim x hidden), for inspection.
  std::vector<Tensor> conditioning_blocks() const;

  SampledSpelling sample(std::span<const double> cond, double temperature,
                         std::size_t max_len, Rng& rng) const;
  SampledSpelling greedy(std::span<const double> cond, double temperature,
                         std::size_t max_len) const;

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  class Cursor;
  friend class Cursor;

  Tensor project_conditioning(const Tensor& conds, bool training, Rng& rng) const;
  SampledSpelling decode(std::span<const double> cond, double temperature,
                         std::size_t max_len, Rng* rng) const;

  SpellerConfig config_;
  SpellAlphabet alphabet_;
  std::string name_;
  std::vector<Parameter> params_;

  Tensor char_emb_;                 // input_symbols x char_emb_dim
  std::vector<LstmLayer> layers_;
  Tensor w_cond_;                   // cond_dim x 4H
  Tensor w_out_;                    // H x output_symbols
  Tensor b_out_;                    // 1 x output_symbols
  Tensor unigram_;                  // 1 x output_symbols
};

// log p_spell(spelling | cond).
double spelling_logprob(const Speller& speller, std::u32string_view spelling,
                        std::span<const double> cond);

// Stochastic estimate of the type-spelling factor: the summed negative log
// probability of the batch's spellings (each conditioned on its own
// embedding row) times |V| / |batch|, where |V| counts spelled lexemes.
// Spellings longer than 20 characters contribute 0.
Tensor type_spelling_loss(const Speller& speller, const Lexicon& lexicon,
                          const Tensor& embeddings, std::span<const LexemeId> batch,
                          bool training, Rng& rng);

struct UnkItem {
  Tensor hidden;  // 1 x cond_dim
  std::u32string surface;
};

// Summed negative log probability of UNK surfaces given hidden states.
Tensor unk_spelling_loss(const Speller& speller, std::span<const UnkItem> items,
                         bool training, Rng& rng);

Tensor nuclear_penalty(const Speller& speller);

SampledSpelling sample_spelling(const Speller& speller, std::span<const double> cond,
                                double temperature, std::size_t max_len, Rng& rng);

}  // namespace ovlm
