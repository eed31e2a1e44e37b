#include "ovlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ovlm/bpe.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/unicode.hpp"

namespace ovlm {

StreamSet make_streams(std::span<const LexemeId> ids, std::size_t k) {
  if (k == 0) throw std::invalid_argument("make_streams: k must be at least 1");
  if (ids.size() < k) {
    throw std::invalid_argument("make_streams: corpus of " + std::to_string(ids.size()) +
                                " tokens is shorter than " + std::to_string(k) + " streams");
  }
  StreamSet s;
  s.length = ids.size() / k;
  s.dropped = ids.size() - s.length * k;
  for (std::size_t i = 0; i < k; ++i) {
    s.ids.emplace_back(ids.begin() + i * s.length, ids.begin() + (i + 1) * s.length);
  }
  return s;
}

std::size_t clamp_seq_len(double draw, std::size_t cap) {
  const double r = std::round(draw);
  if (!(r >= 1.0)) return 1;
  if (r >= static_cast<double>(cap)) return cap;
  return static_cast<std::size_t>(r);
}

std::size_t sample_seq_len(Rng& rng, const TrainConfig& config) {
  const bool alt = rng.bernoulli(config.seq_len_alt_prob);
  const double mean = alt ? config.seq_len_alt_mean : config.seq_len_mean;
  const double sd = alt ? config.seq_len_alt_sd : config.seq_len_sd;
  const double draw = sd > 0.0 ? rng.normal(mean, sd) : mean;
  return clamp_seq_len(draw, config.seq_len_cap);
}

std::size_t position_char_weight(const std::string& surface, LexemeId id, bool units) {
  if (id == kEosId) return 1;
  if (!units) return utf8_length(surface) + 1;
  if (surface.size() >= kEndOfWord.size() &&
      surface.compare(surface.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
    return utf8_length(std::string_view(surface).substr(0, surface.size() - kEndOfWord.size())) + 1;
  }
  return utf8_length(surface);
}

Trainer::Trainer(ModelBundle& models, const EncodedCorpus& train, Rng& rng)
    : models_(models),
      train_(train),
      rng_(rng),
      streams_(make_streams(train.ids, models.config.streams)),
      optim_(models.config.lr, models.config.clip),
      params_(models.parameters()) {
  if (train.surface.size() != train.ids.size()) {
    throw std::invalid_argument("trainer: corpus surfaces do not match ids");
  }
  const bool units = !is_hybrid(models_.config.model);
  char_weight_.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    char_weight_.push_back(position_char_weight(train.surface[i], train.ids[i], units));
  }
  for (std::size_t id = kNumSpecialLexemes; id < models_.lexicon.size(); ++id) {
    type_pool_.push_back(static_cast<LexemeId>(id));
  }
  type_cursor_ = type_pool_.size();  // forces a shuffle on first use
  reset_epoch();
}

void Trainer::reset_epoch() {
  position_ = 0;
  state_ = models_.lm->initial_state(streams_.ids.size());
  prev_.assign(streams_.ids.size(), kEosId);
}

std::vector<LexemeId> Trainer::next_type_batch() {
  const std::size_t size = std::min(models_.config.speller_batch, type_pool_.size());
  if (type_cursor_ + size > type_pool_.size()) {
    std::shuffle(type_pool_.begin(), type_pool_.end(), rng_.engine());
    type_cursor_ = 0;
  }
  std::vector<LexemeId> batch(type_pool_.begin() + type_cursor_,
                              type_pool_.begin() + type_cursor_ + size);
  type_cursor_ += size;
  return batch;
}

Tensor Trainer::unk_loss_for(const std::vector<UnkItem>& items, bool training) {
  return unk_spelling_loss(*models_.unk_scorer(), items, training, rng_);
}

double Trainer::prior_value() const {
  double v = decay_penalty(params_);
  NoGradGuard guard;
  if (models_.speller) v += models_.speller->nuclear_penalty().item();
  if (models_.unk_speller) v += models_.unk_speller->nuclear_penalty().item();
  return v;
}

StepReport Trainer::step(bool update, bool training) {
  if (epoch_done()) throw std::logic_error("trainer: epoch finished; call reset_epoch()");
  const TrainConfig& cfg = models_.config;
  const std::size_t batch = streams_.ids.size();
  const std::size_t seq_len = std::min(sample_seq_len(rng_, cfg), streams_.length - position_);
  const bool hybrid = is_hybrid(cfg.model);
  const Ablation ablation = ablation_of(cfg.model);

  StepReport rep;
  rep.step = ++step_index_;
  rep.seq_len = seq_len;
  rep.tokens = seq_len * batch;

  TokenBatch tb;
  tb.batch = batch;
  tb.steps = seq_len;
  for (std::size_t t = 0; t < seq_len; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const LexemeId target = streams_.ids[b][position_ + t];
      tb.inputs.push_back(t == 0 ? prev_[b] : streams_.ids[b][position_ + t - 1]);
      tb.targets.push_back(target);
    }
  }

  LmForward fw = models_.lm->forward(tb, state_, training, rng_);
  const double n_corpus = static_cast<double>(corpus_tokens());
  const double n_batch = static_cast<double>(rep.tokens);

  Tensor objective = ops::scale(fw.loss, 1.0 / n_batch);
  rep.raw.token_lm = fw.loss.item();

  // Fourth factor: UNK surfaces given the hidden state that predicts them.
  if (hybrid && ablation != Ablation::kOnlyReg) {
    std::vector<UnkItem> items;
    for (std::size_t t = 0; t < seq_len; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        if (tb.targets[t * batch + b] != kUnkId) continue;
        const std::int64_t row[1] = {static_cast<std::int64_t>(b)};
        const std::size_t pos = streams_.offset(b) + position_ + t;
        items.push_back({ops::gather_rows(fw.hidden[t], row),
                         models_.unk_scorer()->alphabet().coerce(utf8_decode(train_.surface[pos]))});
      }
    }
    rep.unk_tokens = items.size();
    if (!items.empty()) {
      Tensor unk = unk_loss_for(items, training);
      rep.raw.unk_spelling = unk.item();
      objective = ops::add(objective, ops::scale(unk, 1.0 / n_batch));
    }
  }

  // Second factor on every period-th step, upweighted for its infrequency.
  if (hybrid && ablation != Ablation::kNoReg && cfg.speller_period > 0 &&
      rep.step % cfg.speller_period == 0 && !type_pool_.empty()) {
    rep.type_step = true;
    const std::vector<LexemeId> ids = next_type_batch();
    Tensor type = type_spelling_loss(*models_.speller, models_.lexicon,
                                     models_.lm->embeddings(), ids, training, rng_);
    rep.raw.type_spelling = type.item();
    objective = ops::add(objective, ops::scale(type, cfg.speller_upweight / n_corpus));
  }

  // Prior: nuclear norms here, weight decay inside the update. Reported at
  // the parameters the step started from.
  rep.raw.prior_decay = decay_penalty(params_);
  if (hybrid) {
    Tensor nuc = models_.speller->nuclear_penalty();
    if (models_.unk_speller) nuc = ops::add(nuc, models_.unk_speller->nuclear_penalty());
    rep.raw.prior_decay += nuc.item();
    objective = ops::add(objective, ops::scale(nuc, 1.0 / n_corpus));
  }

  const double obj = objective.item();
  if (!std::isfinite(obj)) {
    for (auto& p : params_) p.tensor.zero_grad();
    std::ostringstream os;
    os << "non-finite objective at step " << rep.step << " (token-LM " << rep.raw.token_lm
       << ", UNK spelling " << rep.raw.unk_spelling << ", type spelling "
       << rep.raw.type_spelling << ")";
    throw TrainingError(os.str());
  }

  if (update) {
    objective.backward();
    rep.update = sgd_update(params_, optim_);
  }

  rep.scaled.prior_decay = rep.raw.prior_decay;
  rep.scaled.token_lm = rep.raw.token_lm * n_corpus / n_batch;
  rep.scaled.unk_spelling = rep.raw.unk_spelling * n_corpus / n_batch;
  rep.scaled.type_spelling = rep.raw.type_spelling;

  state_ = detach_state(fw.state);
  for (std::size_t b = 0; b < batch; ++b) prev_[b] = tb.targets[(seq_len - 1) * batch + b];
  position_ += seq_len;
  trace_.push_back(rep);
  return rep;
}

EpochReport Trainer::run_epoch(bool update, bool training) {
  if (epoch_done()) reset_epoch();
  EpochReport er;
  er.epoch = ++epoch_;
  std::size_t type_steps = 0;
  const std::size_t first = position_;
  while (!epoch_done()) {
    StepReport r = step(update, training);
    ++er.steps;
    er.tokens += r.tokens;
    er.sums.token_lm += r.raw.token_lm;
    er.sums.unk_spelling += r.raw.unk_spelling;
    if (r.type_step) {
      er.sums.type_spelling += r.scaled.type_spelling;
      ++type_steps;
    }
    er.sums.prior_decay = r.raw.prior_decay;
  }
  if (type_steps) er.sums.type_spelling /= static_cast<double>(type_steps);
  for (std::size_t b = 0; b < streams_.ids.size(); ++b) {
    for (std::size_t t = first; t < streams_.length; ++t) {
      er.chars += char_weight_[streams_.offset(b) + t];
    }
  }
  er.train_bpc = (er.sums.token_lm + er.sums.unk_spelling) / std::numbers::ln2 /
                 static_cast<double>(std::max<std::size_t>(er.chars, 1));
  return er;
}

FactorLosses Trainer::frozen_objective() const {
  NoGradGuard guard;
  Rng unused(0);
  FactorLosses out;
  const std::size_t batch = streams_.ids.size();
  const bool hybrid = is_hybrid(models_.config.model);
  const Ablation ablation = ablation_of(models_.config.model);
  LmState state = models_.lm->initial_state(batch);
  constexpr std::size_t kChunk = 64;
  for (std::size_t pos = 0; pos < streams_.length; pos += kChunk) {
    const std::size_t len = std::min(kChunk, streams_.length - pos);
    TokenBatch tb;
    tb.batch = batch;
    tb.steps = len;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t p = pos + t;
        tb.inputs.push_back(p == 0 ? kEosId : streams_.ids[b][p - 1]);
        tb.targets.push_back(streams_.ids[b][p]);
      }
    }
    LmForward fw = models_.lm->forward(tb, state, false, unused);
    out.token_lm += fw.loss.item();
    state = fw.state;
    if (!hybrid || ablation == Ablation::kOnlyReg) continue;
    std::vector<UnkItem> items;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t b = 0; b < batch; ++b) {
        if (tb.targets[t * batch + b] != kUnkId) continue;
        const std::int64_t row[1] = {static_cast<std::int64_t>(b)};
        items.push_back({ops::gather_rows(fw.hidden[t], row),
                         models_.unk_scorer()->alphabet().coerce(
                             utf8_decode(train_.surface[streams_.offset(b) + pos + t]))});
      }
    }
    out.unk_spelling += unk_spelling_loss(*models_.unk_scorer(), items, false, unused).item();
  }
  if (hybrid && ablation != Ablation::kNoReg && !type_pool_.empty()) {
    out.type_spelling = type_spelling_loss(*models_.speller, models_.lexicon,
                                           models_.lm->embeddings(), type_pool_, false, unused)
                            .item();
  }
  out.prior_decay = prior_value();
  return out;
}

TrainResult train(ModelBundle& models, const EncodedCorpus& train_corpus, Rng& rng,
                  const std::function<double()>& dev_bpc,
                  const std::function<void(const EpochReport&, std::optional<double>)>& on_epoch) {
  TrainResult result;
  Trainer trainer(models, train_corpus, rng);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t e = 0; e < models.config.epochs; ++e) {
    EpochReport er = trainer.run_epoch();
    result.epochs.push_back(er);
    std::optional<double> dev;
    if (dev_bpc) {
      dev = dev_bpc();
      result.dev_bpc.push_back(*dev);
    }
    if (on_epoch) on_epoch(er, dev);
    const double score = dev ? *dev : er.train_bpc;
    if (score < best) {
      best = score;
      since_best = 0;
      result.best_epoch = er.epoch;
      result.best = models.to_checkpoint();
    } else if (dev && ++since_best >= models.config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace ovlm
