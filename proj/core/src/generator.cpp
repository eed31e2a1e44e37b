#include "ovlm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "ovlm/bpe.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/unicode.hpp"

namespace ovlm {

namespace {

constexpr double kGreedyTemperature = 1e-6;

std::uint64_t token_stream_seed(std::uint64_t seed) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

LexemeId draw(const std::vector<double>& logits, double temperature, Rng& rng) {
  if (temperature < kGreedyTemperature) {
    return std::max_element(logits.begin(), logits.end()) - logits.begin();
  }
  auto p = ops::log_softmax(logits, temperature);
  for (double& v : p) v = std::exp(v);
  return static_cast<LexemeId>(rng.categorical(p));
}

}  // namespace

std::string render(const std::vector<GeneratedToken>& tokens, const GenerateOptions& options) {
  std::string out;
  bool line_start = true;
  for (const auto& t : tokens) {
    if (t.id == kEosId) {
      out.push_back('\n');
      line_start = true;
      continue;
    }
    if (!line_start) out.push_back(' ');
    if (t.novel) out += options.novel_open;
    out += t.surface;
    if (t.novel) out += options.novel_close;
    line_start = false;
  }
  return out;
}

Generation generate(const ModelBundle& models, const GenerateOptions& options) {
  if (!(options.temperature > 0.0)) {
    throw std::invalid_argument("generate: temperature must be positive");
  }
  Rng token_rng(token_stream_seed(options.seed));
  Rng spell_rng(options.seed);
  Generation g;
  LmState state = models.lm->initial_state();
  LexemeId prev = kEosId;
  const bool hybrid = is_hybrid(models.config.model);
  std::string pending;  // unit-level baselines: word under construction

  for (std::size_t i = 0; i < options.length; ++i) {
    LmStepResult r = models.lm->step(prev, state);
    const LexemeId id = draw(r.logits, options.temperature, token_rng);
    state = std::move(r.state);
    prev = id;

    if (id == kEosId) {
      if (!pending.empty()) g.tokens.push_back({kUnkId, std::exchange(pending, {}), false, false});
      g.tokens.push_back({kEosId, std::string(kEosSurface), false, false});
      continue;
    }
    if (!hybrid) {
      // Units: a separator or an end-of-word marker closes the word.
      std::string u = models.lexicon.spelling(id);
      bool closes = false;
      if (u == kCharSeparator) {
        u.clear();
        closes = true;
      } else if (u.size() >= kEndOfWord.size() &&
                 u.compare(u.size() - kEndOfWord.size(), kEndOfWord.size(), kEndOfWord) == 0) {
        u.resize(u.size() - kEndOfWord.size());
        closes = true;
      }
      pending += u;
      if (closes && !pending.empty()) {
        g.tokens.push_back({id, std::exchange(pending, {}), false, false});
      }
      continue;
    }
    if (id == kUnkId) {
      const Speller* sp = models.unk_scorer();
      SampledSpelling s = sp->sample(r.hidden, options.temperature,
                                     options.max_spelling_length, spell_rng);
      g.tokens.push_back({id, utf8_encode(s.spelling), true, s.truncated});
      continue;
    }
    g.tokens.push_back({id, models.lexicon.spelling(id), false, false});
  }
  if (!pending.empty()) g.tokens.push_back({kUnkId, pending, false, false});
  g.text = render(g.tokens, options);
  return g;
}

}  // namespace ovlm
