#pragma once

// Optimizes the negative log joint probability of parameters and corpus:
//
//   prior/decay + type spelling + token LM + UNK spelling
//
// with truncated backpropagation through time over parallel streams, a
// periodic upweighted type-spelling minibatch, and the ablations that drop
// or split the spelling factors.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ovlm/checkpoint.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/models.hpp"
#include "ovlm/optim.hpp"
#include "ovlm/random.hpp"
#include "ovlm/train_config.hpp"

namespace ovlm {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Negative log factors in nats. Gaussian normalizers are left out.
struct FactorLosses {
  double prior_decay = 0.0;
  double type_spelling = 0.0;
  double token_lm = 0.0;
  double unk_spelling = 0.0;
  double total() const { return prior_decay + type_spelling + token_lm + unk_spelling; }
  friend bool operator==(const FactorLosses&, const FactorLosses&) = default;
};

struct StreamSet {
  std::size_t length = 0;   // tokens per stream
  std::size_t dropped = 0;  // trailing tokens not covered
  std::vector<std::vector<LexemeId>> ids;
  std::size_t offset(std::size_t k) const { return k * length; }
};

// k contiguous equal slices; the remainder is dropped.
StreamSet make_streams(std::span<const LexemeId> ids, std::size_t k);

std::size_t clamp_seq_len(double draw, std::size_t cap);
std::size_t sample_seq_len(Rng& rng, const TrainConfig& config = {});

struct StepReport {
  std::size_t step = 0;  // 1-based
  std::size_t seq_len = 0;
  std::size_t tokens = 0;
  std::size_t unk_tokens = 0;
  bool type_step = false;
  FactorLosses raw;     // sums over this step's data
  FactorLosses scaled;  // corpus-scale estimates
  UpdateReport update;
};

struct EpochReport {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  std::size_t tokens = 0;
  std::size_t chars = 0;
  // token_lm and unk_spelling: exact sums over the epoch's tokens;
  // type_spelling: mean corpus-scale estimate over type steps;
  // prior_decay: value at the start of the last step.
  FactorLosses sums;
  double train_bpc = 0.0;  // (token_lm + unk_spelling) in bits per character
};

class Trainer {
 public:
  // `train` holds the ids and surfaces the LM is trained on (lexemes, or
  // units for the baselines).
  Trainer(ModelBundle& models, const EncodedCorpus& train, Rng& rng);

  StepReport step(bool update = true, bool training = true);
  EpochReport run_epoch(bool update = true, bool training = true);
  bool epoch_done() const { return position_ >= streams_.length; }
  void reset_epoch();

  // One pass over the same streams with frozen parameters and no dropout;
  // the type factor is computed over all spelled lexemes at once.
  FactorLosses frozen_objective() const;

  const StreamSet& streams() const { return streams_; }
  const std::vector<StepReport>& trace() const { return trace_; }
  std::size_t steps_taken() const { return step_index_; }
  std::size_t corpus_tokens() const { return streams_.length * streams_.ids.size(); }

 private:
  std::vector<LexemeId> next_type_batch();
  Tensor unk_loss_for(const std::vector<UnkItem>& items, bool training);
  double prior_value() const;

  ModelBundle& models_;
  const EncodedCorpus& train_;
  Rng& rng_;
  StreamSet streams_;
  std::vector<std::size_t> char_weight_;  // characters represented per corpus position
  OptimState optim_;
  std::vector<Parameter> params_;

  std::size_t position_ = 0;
  std::size_t step_index_ = 0;
  std::size_t epoch_ = 0;
  LmState state_;
  std::vector<LexemeId> prev_;

  std::vector<LexemeId> type_pool_;
  std::size_t type_cursor_ = 0;

  std::vector<StepReport> trace_;
};

struct TrainResult {
  std::vector<EpochReport> epochs;
  std::vector<double> dev_bpc;
  std::size_t best_epoch = 0;  // 1-based; 0 if no epoch ran
  Checkpoint best;
};

// Runs up to config.epochs epochs. When `dev_bpc` is given it is called
// after each epoch; the best checkpoint is retained and training stops
// after config.patience epochs without improvement.
TrainResult train(ModelBundle& models, const EncodedCorpus& train_corpus, Rng& rng,
                  const std::function<double()>& dev_bpc = {},
                  const std::function<void(const EpochReport&, std::optional<double>)>&
                      on_epoch = {});

// Characters a corpus position stands for: a word token counts its
// characters plus one separator, EOS counts one, and units count the
// characters they spell (a BPE end-of-word marker stands for the separator).
std::size_t position_char_weight(const std::string& surface, LexemeId id, bool units);

}  // namespace ovlm
