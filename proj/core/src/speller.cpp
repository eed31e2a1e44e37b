#include "ovlm/speller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ovlm/char_alphabet.hpp"
#include "ovlm/linalg.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/unicode.hpp"

namespace ovlm {

namespace {

Tensor uniform_param(std::size_t rows, std::size_t cols, double range, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-range, range);
  return Tensor::from(rows, cols, std::move(v), true);
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

constexpr double kGreedyTemperature = 1e-6;

}  // namespace

const char* to_string(SpellerVariant v) {
  switch (v) {
    case SpellerVariant::kFull: return "full";
    case SpellerVariant::kUncond: return "uncond";
    case SpellerVariant::kUnigram: return "1gram";
  }
  return "full";
}

SpellerVariant speller_variant_from_string(std::string_view s) {
  if (s == "full") return SpellerVariant::kFull;
  if (s == "uncond") return SpellerVariant::kUncond;
  if (s == "1gram") return SpellerVariant::kUnigram;
  throw std::invalid_argument("unknown speller variant: " + std::string(s));
}

// ---- alphabet -------------------------------------------------------------

SpellAlphabet::SpellAlphabet(std::set<char32_t> chars)
    : chars_(chars.begin(), chars.end()) {}

SpellAlphabet SpellAlphabet::from_text(std::string_view utf8) {
  std::set<char32_t> chars{kRareCharSymbol};
  for (char32_t c : utf8_decode(utf8)) {
    if (!is_space(c)) chars.insert(c);
  }
  return SpellAlphabet(std::move(chars));
}

bool SpellAlphabet::contains(char32_t c) const {
  return std::binary_search(chars_.begin(), chars_.end(), c);
}

std::int64_t SpellAlphabet::index(char32_t c) const {
  auto it = std::lower_bound(chars_.begin(), chars_.end(), c);
  if (it == chars_.end() || *it != c) {
    throw std::invalid_argument("speller: character U+" +
                                [&] {
                                  std::ostringstream os;
                                  os << std::hex << std::uppercase
                                     << static_cast<std::uint32_t>(c);
                                  return os.str();
                                }() +
                                " is outside the alphabet");
  }
  return it - chars_.begin();
}

std::u32string SpellAlphabet::coerce(std::u32string_view s) const {
  std::u32string out(s);
  for (char32_t& c : out) {
    if (contains(c)) continue;
    if (!contains(kRareCharSymbol)) index(c);  // throws
    c = kRareCharSymbol;
  }
  return out;
}

std::string SpellAlphabet::serialize() const {
  std::ostringstream os;
  os << std::hex << std::uppercase;
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    if (i) os << ' ';
    os << static_cast<std::uint32_t>(chars_[i]);
  }
  return os.str();
}

SpellAlphabet SpellAlphabet::deserialize(std::string_view s) {
  std::istringstream is{std::string(s)};
  std::set<char32_t> chars;
  std::uint32_t cp = 0;
  while (is >> std::hex >> cp) chars.insert(static_cast<char32_t>(cp));
  if (!is.eof()) throw std::invalid_argument("speller: malformed alphabet string");
  return SpellAlphabet(std::move(chars));
}

// ---- incremental decoding --------------------------------------------------

class Speller::Cursor {
 public:
  Cursor(const Speller& sp, std::span<const double> cond) : sp_(sp) {
    const auto& cfg = sp.config_;
    if (cfg.variant == SpellerVariant::kUnigram) return;
    if (cond.size() != cfg.cond_dim) {
      throw std::invalid_argument("speller: conditioning vector has dimension " +
                                  std::to_string(cond.size()) + ", expected " +
                                  std::to_string(cfg.cond_dim));
    }
    for (std::size_t l = 0; l < sp.layers_.size(); ++l) {
      states_.push_back(LstmState::zeros(1, cfg.hidden));
    }
    if (cfg.variant == SpellerVariant::kFull) {
      Tensor c = Tensor::from(1, cond.size(), {cond.begin(), cond.end()});
      extra_ = ops::matmul(c, sp.w_cond_);
    }
  }

  // Feeds one input symbol (BOW or 1 + char index) and returns the logits
  // of the next output symbol.
  std::vector<double> step(std::int64_t input_symbol) {
    if (sp_.config_.variant == SpellerVariant::kUnigram) {
      auto u = sp_.unigram_.values();
      return {u.begin(), u.end()};
    }
    const std::int64_t ids[1] = {input_symbol};
    Tensor x = ops::gather_rows(sp_.char_emb_, ids);
    for (std::size_t l = 0; l < sp_.layers_.size(); ++l) {
      states_[l] = lstm_step(sp_.layers_[l], x, states_[l], l == 0 ? extra_ : Tensor{});
      x = states_[l].h;
    }
    Tensor logits = ops::add_row(ops::matmul(x, sp_.w_out_), sp_.b_out_);
    auto v = logits.values();
    return {v.begin(), v.end()};
  }

 private:
  NoGradGuard guard_;
  const Speller& sp_;
  std::vector<LstmState> states_;
  Tensor extra_;
};

// ---- model ---------------------------------------------------------------

Speller::Speller(SpellerConfig config, SpellAlphabet alphabet, Rng& init_rng,
                 std::string name)
    : config_(config), alphabet_(std::move(alphabet)), name_(std::move(name)) {
  if (alphabet_.size() == 0) throw std::invalid_argument("speller: empty alphabet");
  if (config_.variant != SpellerVariant::kUnigram &&
      (config_.hidden == 0 || config_.layers == 0 || config_.char_emb_dim == 0 ||
       config_.cond_dim == 0)) {
    throw std::invalid_argument("speller: dimensions must be positive");
  }
  const double decay = config_.weight_decay;
  const std::size_t out = alphabet_.output_symbols();
  if (config_.variant == SpellerVariant::kUnigram) {
    unigram_ = Tensor::zeros(1, out, true);
    params_.push_back({name_ + ".unigram", unigram_, decay});
    return;
  }
  const std::size_t hs = config_.hidden;
  const double range = 1.0 / std::sqrt(static_cast<double>(hs));
  char_emb_ = uniform_param(alphabet_.input_symbols(), config_.char_emb_dim, 0.1, init_rng);
  params_.push_back({name_ + ".char_emb", char_emb_, decay});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::size_t in = l == 0 ? config_.char_emb_dim : hs;
    layers_.push_back(LstmLayer::create(in, hs, range, init_rng));
    const std::string p = name_ + ".l" + std::to_string(l);
    params_.push_back({p + ".w_input", layers_.back().w_input, decay});
    params_.push_back({p + ".w_hidden", layers_.back().w_hidden, decay});
    params_.push_back({p + ".bias", layers_.back().bias, decay});
  }
  w_cond_ = uniform_param(config_.cond_dim, 4 * hs, range, init_rng);
  params_.push_back({name_ + ".l0.w_cond", w_cond_, decay});
  w_out_ = uniform_param(hs, out, range, init_rng);
  params_.push_back({name_ + ".out.w", w_out_, decay});
  b_out_ = Tensor::zeros(1, out, true);
  params_.push_back({name_ + ".out.b", b_out_, decay});
}

Tensor Speller::project_conditioning(const Tensor& conds, bool training, Rng& rng) const {
  // One dropout mask per word: the conditioning vector is projected once
  // and reused at every character step.
  Tensor dropped = ops::dropout(conds, config_.cond_dropout, training, rng);
  return ops::matmul(dropped, w_cond_);
}

Tensor Speller::nll(std::span<const std::u32string> spellings, const Tensor& conds,
                    bool training, Rng& rng) const {
  const std::size_t batch = spellings.size();
  if (batch == 0) return Tensor::scalar(0.0);
  const std::int64_t eow = alphabet_.eow();

  // Output targets per word: characters then EOW.
  std::size_t steps = 0;
  std::vector<std::vector<std::int64_t>> targets(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (char32_t c : spellings[b]) targets[b].push_back(alphabet_.index(c));
    targets[b].push_back(eow);
    steps = std::max(steps, targets[b].size());
  }

  if (config_.variant == SpellerVariant::kUnigram) {
    std::vector<std::int64_t> flat;
    for (const auto& t : targets) flat.insert(flat.end(), t.begin(), t.end());
    const std::vector<std::int64_t> zeros(flat.size(), 0);
    return ops::softmax_xent(ops::gather_rows(unigram_, zeros), flat);
  }

  if (conds.rows() != batch || conds.cols() != config_.cond_dim) {
    throw std::invalid_argument("speller: conditioning matrix must be batch x " +
                                std::to_string(config_.cond_dim));
  }
  Tensor extra;
  if (config_.variant == SpellerVariant::kFull) {
    extra = project_conditioning(conds, training, rng);
  }

  std::vector<LstmState> states;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    states.push_back(LstmState::zeros(batch, config_.hidden));
  }
  std::vector<Tensor> tops;
  std::vector<std::int64_t> flat_targets;
  tops.reserve(steps);
  std::vector<std::int64_t> inputs(batch);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      // Input at step t is BOW or the character emitted at step t-1; rows
      // that have already finished are fed BOW and ignored.
      inputs[b] = (t == 0 || t >= targets[b].size()) ? alphabet_.bow()
                                                     : targets[b][t - 1] + 1;
      flat_targets.push_back(t < targets[b].size() ? targets[b][t] : -1);
    }
    Tensor x = ops::gather_rows(char_emb_, inputs);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      states[l] = lstm_step(layers_[l], x, states[l], l == 0 ? extra : Tensor{});
      x = ops::dropout(states[l].h, config_.dropout, training, rng);
    }
    tops.push_back(x);
  }
  Tensor h = ops::concat_rows(tops);
  Tensor logits = ops::add_row(ops::matmul(h, w_out_), b_out_);
  return ops::softmax_xent(logits, flat_targets);
}

double Speller::logprob(std::u32string_view spelling, std::span<const double> cond) const {
  NoGradGuard guard;
  Rng unused(0);
  const std::u32string word(spelling);
  Tensor conds;
  if (config_.variant != SpellerVariant::kUnigram) {
    if (cond.size() != config_.cond_dim) {
      throw std::invalid_argument("speller: conditioning vector has dimension " +
                                  std::to_string(cond.size()) + ", expected " +
                                  std::to_string(config_.cond_dim));
    }
    conds = Tensor::from(1, cond.size(), {cond.begin(), cond.end()});
  }
  return -nll(std::span<const std::u32string>(&word, 1), conds, false, unused).item();
}

std::vector<double> Speller::next_distribution(std::u32string_view prefix,
                                               std::span<const double> cond,
                                               double temperature) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("speller: temperature must be positive");
  Cursor cursor(*this, cond);
  std::vector<double> logits = cursor.step(alphabet_.bow());
  for (char32_t c : prefix) logits = cursor.step(alphabet_.index(c) + 1);
  auto lsm = ops::log_softmax(logits, temperature);
  for (double& v : lsm) v = std::exp(v);
  return lsm;
}

std::vector<Tensor> Speller::conditioning_blocks() const {
  std::vector<Tensor> blocks;
  if (config_.variant == SpellerVariant::kUnigram) return blocks;
  for (std::size_t g = 0; g < 4; ++g) {
    blocks.push_back(ops::slice_cols(w_cond_, g * config_.hidden, config_.hidden));
  }
  return blocks;
}

Tensor Speller::nuclear_penalty() const {
  if (config_.variant == SpellerVariant::kUnigram || config_.nuclear_coef == 0.0) {
    return Tensor::scalar(0.0);
  }
  Tensor total;
  for (const Tensor& block : conditioning_blocks()) {
    Tensor n = ops::nuclear_norm(block);
    total = total.defined() ? ops::add(total, n) : n;
  }
  return ops::scale(total, config_.nuclear_coef);
}

SampledSpelling Speller::decode(std::span<const double> cond, double temperature,
                                std::size_t max_len, Rng* rng) const {
  if (!(temperature > 0.0)) throw std::invalid_argument("speller: temperature must be positive");
  Cursor cursor(*this, cond);
  SampledSpelling out;
  std::vector<double> logits = cursor.step(alphabet_.bow());
  while (true) {
    std::size_t sym = 0;
    if (rng == nullptr || temperature < kGreedyTemperature) {
      sym = argmax(logits);
    } else {
      auto lsm = ops::log_softmax(logits, temperature);
      for (double& v : lsm) v = std::exp(v);
      sym = rng->categorical(lsm);
    }
    if (static_cast<std::int64_t>(sym) == alphabet_.eow()) return out;
    if (out.spelling.size() == max_len) {
      out.truncated = true;
      return out;
    }
    out.spelling.push_back(alphabet_.char_at(static_cast<std::int64_t>(sym)));
    logits = cursor.step(static_cast<std::int64_t>(sym) + 1);
  }
}

SampledSpelling Speller::sample(std::span<const double> cond, double temperature,
                                std::size_t max_len, Rng& rng) const {
  return decode(cond, temperature, max_len, &rng);
}

SampledSpelling Speller::greedy(std::span<const double> cond, double temperature,
                                std::size_t max_len) const {
  return decode(cond, temperature, max_len, nullptr);
}

void Speller::save(Checkpoint& ckpt) const {
  ckpt.metadata[name_ + ".variant"] = to_string(config_.variant);
  ckpt.metadata[name_ + ".alphabet"] = alphabet_.serialize();
  ckpt.add_all(params_);
}

void Speller::load(const Checkpoint& ckpt) {
  auto it = ckpt.metadata.find(name_ + ".variant");
  if (it != ckpt.metadata.end() &&
      speller_variant_from_string(it->second) != config_.variant) {
    throw CheckpointError("speller variant in checkpoint is " + it->second +
                          ", model is " + to_string(config_.variant));
  }
  ckpt.restore_all(params_);
}

// ---- free functions ----------------------------------------------------------

double spelling_logprob(const Speller& speller, std::u32string_view spelling,
                        std::span<const double> cond) {
  return speller.logprob(spelling, cond);
}

Tensor type_spelling_loss(const Speller& speller, const Lexicon& lexicon,
                          const Tensor& embeddings, std::span<const LexemeId> batch,
                          bool training, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("type_spelling_loss: empty batch");
  std::vector<LexemeId> kept;
  std::vector<std::u32string> spellings;
  for (LexemeId id : batch) {
    if (id < 0 || static_cast<std::size_t>(id) >= lexicon.size() || Lexicon::is_special(id)) {
      throw std::invalid_argument("type_spelling_loss: batch must hold spelled lexemes only");
    }
    std::u32string s = utf8_decode(lexicon.spelling(id));
    if (s.size() > kMaxTypeSpellingLength) continue;
    kept.push_back(id);
    spellings.push_back(std::move(s));
  }
  if (kept.empty()) return Tensor::scalar(0.0);
  Tensor conds;
  if (speller.config().variant != SpellerVariant::kUnigram) {
    conds = ops::gather_rows(embeddings, kept);
  }
  const double scale = static_cast<double>(lexicon.num_words()) /
                       static_cast<double>(batch.size());
  return ops::scale(speller.nll(spellings, conds, training, rng), scale);
}

Tensor unk_spelling_loss(const Speller& speller, std::span<const UnkItem> items,
                         bool training, Rng& rng) {
  if (items.empty()) return Tensor::scalar(0.0);
  std::vector<std::u32string> spellings;
  std::vector<Tensor> rows;
  for (const auto& item : items) {
    if (speller.config().variant != SpellerVariant::kUnigram &&
        (item.hidden.rows() != 1 || item.hidden.cols() != speller.config().cond_dim)) {
      throw std::invalid_argument("unk_spelling_loss: hidden state dimension mismatch");
    }
    spellings.push_back(item.surface);
    rows.push_back(item.hidden);
  }
  Tensor conds;
  if (speller.config().variant != SpellerVariant::kUnigram) conds = ops::concat_rows(rows);
  return speller.nll(spellings, conds, training, rng);
}

Tensor nuclear_penalty(const Speller& speller) { return speller.nuclear_penalty(); }

SampledSpelling sample_spelling(const Speller& speller, std::span<const double> cond,
                                double temperature, std::size_t max_len, Rng& rng) {
  return speller.sample(cond, temperature, max_len, rng);
}

}  // namespace ovlm
