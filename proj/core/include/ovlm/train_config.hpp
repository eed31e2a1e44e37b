#pragma once

// Training configuration for every model family, plus the flat
// `key = value` file format used by --config and checkpoint metadata.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "ovlm/lexeme_lm.hpp"
#include "ovlm/speller.hpp"

namespace ovlm {

enum class ModelFamily {
  kFull,
  kNoReg,
  kOnlyReg,
  kSepReg,
  kUnigram,
  kUncond,
  kPureChar,
  kPureBpe,
};

// Which factors of the joint objective are active for the hybrid families.
enum class Ablation { kFull, kNoReg, kOnlyReg, kSepReg };

const char* to_string(ModelFamily f);
ModelFamily model_family_from_string(std::string_view s);
bool is_hybrid(ModelFamily f);
Ablation ablation_of(ModelFamily f);
SpellerVariant speller_variant_of(ModelFamily f);

struct TrainConfig {
  ModelFamily model = ModelFamily::kFull;

  std::size_t streams = 40;
  double seq_len_mean = 70.0;
  double seq_len_sd = 5.0;
  double seq_len_alt_mean = 35.0;
  double seq_len_alt_sd = 5.0;
  double seq_len_alt_prob = 0.05;
  std::size_t seq_len_cap = 80;

  double lr = 30.0;
  double clip = 0.25;

  std::size_t speller_batch = 1500;
  std::size_t speller_period = 50;
  double speller_upweight = 100.0;

  std::size_t vocab_size = kDefaultVocabSize;
  std::size_t bpe_merges = 40000;
  std::size_t char_threshold = 25;

  std::size_t epochs = 40;
  std::size_t patience = 5;
  std::uint64_t seed = 1;

  LmConfig lm;
  SpellerConfig speller;

  // Applies the per-family defaults (pure-char hyperparameters, speller
  // variant); called before file/flag overrides.
  static TrainConfig for_family(ModelFamily family);

  // Sets one field from its textual key; throws std::invalid_argument for
  // unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);

  std::map<std::string, std::string> to_map() const;
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
};

// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
std::map<std::string, std::string> read_key_values(std::istream& in);
void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv);

// FNV-1a, hex encoded. Used to tie checkpoints to their vocabulary and
// configuration.
std::string fnv1a_hex(std::string_view data);

}  // namespace ovlm
