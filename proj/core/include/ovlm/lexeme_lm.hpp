#pragma once

// Lexeme-level LSTM language model. The last layer is sized to the
// embedding dimension so that output logits are dot products with the
// embedding table (plus a per-lexeme bias) and so that its hidden state can
// condition the speller directly.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ovlm/checkpoint.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/lstm.hpp"
#include "ovlm/optim.hpp"
#include "ovlm/random.hpp"
#include "ovlm/tensor.hpp"

namespace ovlm {

struct LmConfig {
  std::size_t embed_dim = 400;
  std::size_t hidden = 1150;
  std::size_t layers = 3;
  double input_dropout = 0.4;   // on embedding lookups
  double hidden_dropout = 0.25;  // between LSTM layers
  double output_dropout = 0.4;  // on the top hidden state before the softmax
  double weight_decay = 1.2e-6;
  double embed_decay = 1.2e-6;  // Gaussian prior on e(w)
};

// One LSTM state per layer.
using LmState = std::vector<LstmState>;

// Step-major batch: entry [t * batch + b] is stream b at step t.
struct TokenBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<LexemeId> inputs;
  std::vector<LexemeId> targets;
};

struct LmForward {
  Tensor loss;                  // summed cross-entropy in nats
  LmState state;                // final state (graph attached)
  std::vector<Tensor> hidden;   // per step: batch x embed_dim top-layer output
};

struct LmStepResult {
  LmState state;
  std::vector<double> logits;  // over the vocabulary
  std::vector<double> hidden;  // top-layer hidden state, embed_dim
};

struct UnkHidden {
  std::size_t position = 0;
  std::vector<double> hidden;
};

struct SequenceLoss {
  double loss = 0.0;  // nats
  LmState state;
  std::vector<UnkHidden> unk_hiddens;
};

class LexemeLM {
 public:
  LexemeLM(LmConfig config, std::size_t vocab_size, Rng& init_rng,
           std::string name = "lm");

  const LmConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t embed_dim() const { return config_.embed_dim; }
  const Tensor& embeddings() const { return embedding_; }
  const Tensor& output_bias() const { return out_bias_; }
  const std::vector<LstmLayer>& layers() const { return layers_; }
  std::vector<Parameter>& parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }

  LmState initial_state(std::size_t batch = 1) const;

  // Differentiable batched forward over a TokenBatch from `state`.
  LmForward forward(const TokenBatch& batch, const LmState& state, bool training,
                    Rng& rng) const;

  // Logits for the next lexeme after feeding `prev`; no graph, no dropout.
  LmStepResult step(LexemeId prev, const LmState& state) const;

  void save(Checkpoint& ckpt) const;
  void load(const Checkpoint& ckpt);

 private:
  void check_id(LexemeId id) const;

  LmConfig config_;
  std::size_t vocab_size_;
  std::string name_;
  Tensor embedding_;  // V x d
  Tensor out_bias_;   // 1 x V
  std::vector<LstmLayer> layers_;
  std::vector<Parameter> params_;
};

LmStepResult lm_step(const LexemeLM& model, LexemeId prev, const LmState& state);

// Scores `ids` one token at a time, predicting ids[0] after `prev`.
// Records the hidden state that predicts each UNK.
SequenceLoss sequence_loss(const LexemeLM& model, std::span<const LexemeId> ids,
                           LexemeId prev, const LmState& state);

LmState detach_state(const LmState& state);

}  // namespace ovlm
