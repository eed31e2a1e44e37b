#pragma once

// The set of models one training run produces: a lexeme (or unit) LM, the
// speller for hybrid families, and for sep-reg a second speller that only
// sees UNK tokens.

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "ovlm/bpe.hpp"
#include "ovlm/checkpoint.hpp"
#include "ovlm/lexeme_lm.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/speller.hpp"
#include "ovlm/train_config.hpp"

namespace ovlm {

struct ModelBundle {
  TrainConfig config;
  Lexicon lexicon;  // lexemes, or character/BPE units for the baselines
  SpellAlphabet alphabet;
  std::optional<MergeTable> merges;  // pure-bpe only
  std::unique_ptr<LexemeLM> lm;
  std::unique_ptr<Speller> speller;
  std::unique_ptr<Speller> unk_speller;  // sep-reg only

  // Builds freshly initialized models. The speller's conditioning
  // dimension is taken from the LM embedding dimension.
  static ModelBundle create(const TrainConfig& config, Lexicon lexicon,
                            SpellAlphabet alphabet, Rng& init_rng);

  // The speller that scores UNK tokens (the second one under sep-reg).
  const Speller* unk_scorer() const {
    return unk_speller ? unk_speller.get() : speller.get();
  }

  std::vector<Parameter> parameters() const;

  // Checkpoint with config, vocabulary hash and all parameters.
  Checkpoint to_checkpoint() const;
  // Rebuilds models from a checkpoint and its vocabulary; verifies that
  // the vocabulary matches the one the checkpoint was trained with.
  static ModelBundle from_checkpoint(const Checkpoint& ckpt, Lexicon lexicon,
                                     std::optional<MergeTable> merges = std::nullopt);
};

std::string vocab_hash(const Lexicon& lexicon);

}  // namespace ovlm
