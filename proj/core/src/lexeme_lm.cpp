#include "ovlm/lexeme_lm.hpp"

#include <cmath>
#include <stdexcept>

#include "ovlm/ops.hpp"

namespace ovlm {

namespace {

Tensor uniform_param(std::size_t rows, std::size_t cols, double range, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-range, range);
  return Tensor::from(rows, cols, std::move(v), true);
}

}  // namespace

LexemeLM::LexemeLM(LmConfig config, std::size_t vocab_size, Rng& init_rng,
                   std::string name)
    : config_(config), vocab_size_(vocab_size), name_(std::move(name)) {
  if (vocab_size_ == 0 || config_.embed_dim == 0 || config_.hidden == 0 ||
      config_.layers == 0) {
    throw std::invalid_argument("lexeme LM: dimensions must be positive");
  }
  embedding_ = uniform_param(vocab_size_, config_.embed_dim, 0.1, init_rng);
  params_.push_back({name_ + ".embedding", embedding_, config_.embed_decay});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::size_t in = l == 0 ? config_.embed_dim : config_.hidden;
    const std::size_t out = l + 1 == config_.layers ? config_.embed_dim : config_.hidden;
    layers_.push_back(
        LstmLayer::create(in, out, 1.0 / std::sqrt(static_cast<double>(out)), init_rng));
    const std::string p = name_ + ".l" + std::to_string(l);
    params_.push_back({p + ".w_input", layers_.back().w_input, config_.weight_decay});
    params_.push_back({p + ".w_hidden", layers_.back().w_hidden, config_.weight_decay});
    params_.push_back({p + ".bias", layers_.back().bias, config_.weight_decay});
  }
  out_bias_ = Tensor::zeros(1, vocab_size_, true);
  params_.push_back({name_ + ".out.bias", out_bias_, config_.weight_decay});
}

void LexemeLM::check_id(LexemeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
    throw std::invalid_argument("lexeme LM: id " + std::to_string(id) +
                                " outside vocabulary of size " + std::to_string(vocab_size_));
  }
}

LmState LexemeLM::initial_state(std::size_t batch) const {
  LmState s;
  for (const auto& layer : layers_) s.push_back(LstmState::zeros(batch, layer.hidden_size));
  return s;
}

LmForward LexemeLM::forward(const TokenBatch& batch, const LmState& state, bool training,
                            Rng& rng) const {
  const std::size_t n = batch.batch * batch.steps;
  if (n == 0) throw std::invalid_argument("lexeme LM: empty batch");
  if (batch.inputs.size() != n || batch.targets.size() != n) {
    throw std::invalid_argument("lexeme LM: batch inputs/targets do not match shape");
  }
  if (state.size() != layers_.size() || state[0].h.rows() != batch.batch) {
    throw std::invalid_argument("lexeme LM: state does not match batch");
  }
  for (LexemeId id : batch.inputs) check_id(id);
  for (LexemeId id : batch.targets) check_id(id);

  LmForward out;
  out.state = state;
  Tensor loss;
  for (std::size_t t = 0; t < batch.steps; ++t) {
    std::span<const LexemeId> in(batch.inputs.data() + t * batch.batch, batch.batch);
    std::span<const LexemeId> tg(batch.targets.data() + t * batch.batch, batch.batch);
    Tensor x = ops::dropout(ops::gather_rows(embedding_, in), config_.input_dropout,
                            training, rng);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.state[l] = lstm_step(layers_[l], x, out.state[l]);
      x = out.state[l].h;
      if (l + 1 < layers_.size()) {
        x = ops::dropout(x, config_.hidden_dropout, training, rng);
      }
    }
    out.hidden.push_back(x);
    Tensor h = ops::dropout(x, config_.output_dropout, training, rng);
    Tensor logits = ops::add_row(ops::matmul_nt(h, embedding_), out_bias_);
    Tensor step_loss = ops::softmax_xent(logits, tg);
    loss = loss.defined() ? ops::add(loss, step_loss) : step_loss;
  }
  out.loss = loss;
  return out;
}

LmStepResult LexemeLM::step(LexemeId prev, const LmState& state) const {
  check_id(prev);
  NoGradGuard guard;
  const LexemeId ids[1] = {prev};
  LmStepResult r;
  r.state = state;
  Tensor x = ops::gather_rows(embedding_, ids);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    r.state[l] = lstm_step(layers_[l], x, r.state[l]);
    x = r.state[l].h;
  }
  Tensor logits = ops::add_row(ops::matmul_nt(x, embedding_), out_bias_);
  auto lv = logits.values();
  auto hv = x.values();
  r.logits.assign(lv.begin(), lv.end());
  r.hidden.assign(hv.begin(), hv.end());
  return r;
}

void LexemeLM::save(Checkpoint& ckpt) const {
  ckpt.metadata[name_ + ".vocab_size"] = std::to_string(vocab_size_);
  ckpt.add_all(params_);
}

void LexemeLM::load(const Checkpoint& ckpt) {
  auto it = ckpt.metadata.find(name_ + ".vocab_size");
  if (it != ckpt.metadata.end() && it->second != std::to_string(vocab_size_)) {
    throw CheckpointError("checkpoint vocabulary size " + it->second +
                          " does not match model size " + std::to_string(vocab_size_));
  }
  ckpt.restore_all(params_);
}

LmStepResult lm_step(const LexemeLM& model, LexemeId prev, const LmState& state) {
  return model.step(prev, state);
}

SequenceLoss sequence_loss(const LexemeLM& model, std::span<const LexemeId> ids,
                           LexemeId prev, const LmState& state) {
  if (ids.empty()) throw std::invalid_argument("sequence_loss: empty segment");
  SequenceLoss out;
  out.state = state;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    LmStepResult r = model.step(prev, out.state);
    auto lsm = ops::log_softmax(r.logits);
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= lsm.size()) {
      throw std::invalid_argument("sequence_loss: id outside vocabulary");
    }
    out.loss -= lsm[ids[i]];
    if (ids[i] == kUnkId) out.unk_hiddens.push_back({i, std::move(r.hidden)});
    out.state = std::move(r.state);
    prev = ids[i];
  }
  return out;
}

LmState detach_state(const LmState& state) {
  LmState out;
  out.reserve(state.size());
  for (const auto& s : state) out.push_back(s.detach());
  return out;
}

}  // namespace ovlm
