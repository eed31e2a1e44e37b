#include "ovlm/evaluator.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "ovlm/ops.hpp"
#include "ovlm/trainer.hpp"
#include "ovlm/unicode.hpp"

namespace ovlm {

namespace {

constexpr const char* kBinNames[kNumFrequencyBins] = {"unseen", "rare", "frequent"};

}  // namespace

double token_logprob(const ModelBundle& models, LexemeId id, std::string_view surface,
                     const LmStepResult& step) {
  const auto lsm = ops::log_softmax(step.logits);
  if (id < 0 || static_cast<std::size_t>(id) >= lsm.size()) {
    throw std::invalid_argument("token_logprob: id outside vocabulary");
  }
  double lp = lsm[id];
  if (id == kUnkId && models.unk_scorer() != nullptr) {
    const Speller& sp = *models.unk_scorer();
    lp += sp.logprob(sp.alphabet().coerce(utf8_decode(surface)), step.hidden);
  }
  return lp;
}

std::vector<double> score_tokens(const ModelBundle& models, const EncodedCorpus& corpus) {
  std::vector<double> out;
  out.reserve(corpus.size());
  LmState state = models.lm->initial_state();
  LexemeId prev = kEosId;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    LmStepResult r = models.lm->step(prev, state);
    out.push_back(token_logprob(models, corpus.ids[i], corpus.surface[i], r));
    state = std::move(r.state);
    prev = corpus.ids[i];
  }
  return out;
}

std::vector<double> score_tokens(const ModelBundle& models, const SegmentedCorpus& corpus) {
  std::vector<double> unit_lp;
  unit_lp.reserve(corpus.units.size());
  LmState state = models.lm->initial_state();
  LexemeId prev = kEosId;
  for (LexemeId id : corpus.units.ids) {
    LmStepResult r = models.lm->step(prev, state);
    unit_lp.push_back(ops::log_softmax(r.logits).at(static_cast<std::size_t>(id)));
    state = std::move(r.state);
    prev = id;
  }
  std::vector<double> out;
  out.reserve(corpus.token_spans.size());
  for (const auto& [b, e] : corpus.token_spans) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += unit_lp[i];
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> article_starts(const EncodedCorpus& corpus) {
  std::vector<std::size_t> starts;
  if (corpus.size() == 0) return starts;
  starts.push_back(0);
  std::size_t line_begin = 0;
  for (std::size_t i = 0; i <= corpus.size(); ++i) {
    if (i < corpus.size() && corpus.ids[i] != kEosId) continue;
    // Line is [line_begin, i). A top-level heading is "= words =", with
    // single '=' tokens only at both ends.
    const std::size_t n = i - line_begin;
    if (n >= 3 && corpus.surface[line_begin] == "=" && corpus.surface[i - 1] == "=" &&
        corpus.surface[line_begin + 1] != "=" && corpus.surface[i - 2] != "=" &&
        line_begin != 0) {
      // The article begins with the blank line preceding the heading, if any.
      std::size_t s = line_begin;
      while (s > starts.back() && corpus.ids[s - 1] == kEosId &&
             (s < 2 || corpus.ids[s - 2] == kEosId)) {
        --s;
      }
      if (s > starts.back()) starts.push_back(s);
    }
    line_begin = i + 1;
  }
  return starts;
}

EvalReport summarize(std::span<const double> logprobs, std::span<const std::string> surfaces,
                     std::span<const LexemeId> ids,
                     const std::unordered_map<std::string, std::uint64_t>& train_type_counts,
                     std::size_t char_count_original,
                     std::span<const std::size_t> article_begins) {
  if (logprobs.size() != surfaces.size() || ids.size() != surfaces.size()) {
    throw std::invalid_argument("summarize: token arrays differ in length");
  }
  EvalReport r;
  r.char_count_original = char_count_original;
  r.tokens = logprobs.size();
  std::vector<std::size_t> begins(article_begins.begin(), article_begins.end());
  if (begins.empty() || begins.front() != 0) begins.insert(begins.begin(), 0);
  std::size_t article = 0;
  double art_bits = 0.0;
  std::size_t art_chars = 0;
  auto close_article = [&] {
    if (art_chars > 0) r.article_bpc.push_back(art_bits / static_cast<double>(art_chars));
    art_bits = 0.0;
    art_chars = 0;
  };
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    while (article + 1 < begins.size() && i >= begins[article + 1]) {
      close_article();
      ++article;
    }
    const double bits = -logprobs[i] / std::numbers::ln2;
    const std::size_t chars = position_char_weight(surfaces[i], ids[i], false);
    r.total_bits += bits;
    art_bits += bits;
    art_chars += chars;
    if (ids[i] == kEosId) {
      ++r.eos_tokens;
      r.eos_bits += bits;
      continue;
    }
    auto it = train_type_counts.find(surfaces[i]);
    const auto bin = static_cast<std::size_t>(
        frequency_bin_for(it == train_type_counts.end() ? 0 : it->second));
    r.bins[bin].tokens += 1;
    r.bins[bin].chars += chars;
    r.bins[bin].bits += bits;
  }
  close_article();
  r.total_bpc = char_count_original ? r.total_bits / static_cast<double>(char_count_original)
                                    : 0.0;
  return r;
}

EvalReport corpus_bpc(const ModelBundle& models, const EncodedCorpus& dev) {
  const auto lp = score_tokens(models, dev);
  const auto starts = article_starts(dev);
  return summarize(lp, dev.surface, dev.ids, models.lexicon.type_counts(),
                   dev.char_count_original, starts);
}

EvalReport corpus_bpc(const ModelBundle& models, const SegmentedCorpus& dev,
                      const std::unordered_map<std::string, std::uint64_t>& train_type_counts) {
  const auto lp = score_tokens(models, dev);
  EncodedCorpus words;
  words.surface = dev.token_surface;
  for (const auto& s : dev.token_surface) words.ids.push_back(s == kEosSurface ? kEosId : kUnkId);
  words.char_count_original = dev.units.char_count_original;
  const auto starts = article_starts(words);
  return summarize(lp, words.surface, words.ids, train_type_counts,
                   words.char_count_original, starts);
}

namespace {

struct SignFlip {
  std::vector<double> d;
  double observed = 0.0;
  double tol = 0.0;

  SignFlip(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("permutation_test: length mismatch");
    double scale = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      d.push_back(a[i] - b[i]);
      observed += d.back();
      scale += std::fabs(d.back());
    }
    observed = std::fabs(observed);
    tol = 1e-12 * (1.0 + scale);
  }

  template <typename SignOf>
  bool extreme(SignOf sign_of) const {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += sign_of(i) ? -d[i] : d[i];
    return std::fabs(s) >= observed - tol;
  }
};

}  // namespace

double permutation_test_exhaustive(std::span<const double> a, std::span<const double> b) {
  const SignFlip sf(a, b);
  const std::size_t n = sf.d.size();
  if (n >= 32) throw std::invalid_argument("permutation_test: too many articles to enumerate");
  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t extreme = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    if (sf.extreme([mask](std::size_t i) { return (mask >> i) & 1U; })) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

double permutation_test_monte_carlo(std::span<const double> a, std::span<const double> b,
                                    std::size_t trials, Rng& rng) {
  const SignFlip sf(a, b);
  if (sf.d.empty()) return 1.0;
  std::size_t extreme = 1;  // the observed assignment
  std::vector<char> flip(sf.d.size());
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& f : flip) f = static_cast<char>(rng.bernoulli(0.5));
    if (sf.extreme([&flip](std::size_t i) { return flip[i] != 0; })) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(trials + 1);
}

double permutation_test(std::span<const double> a, std::span<const double> b,
                        std::size_t trials, Rng& rng) {
  if (a.size() != b.size()) throw std::invalid_argument("permutation_test: length mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 1.0;
  if (n < 32 && (std::uint64_t{1} << n) <= trials) return permutation_test_exhaustive(a, b);
  return permutation_test_monte_carlo(a, b, trials, rng);
}

void write_report_table(std::ostream& out, const EvalReport& r, std::string_view label) {
  out << std::fixed << std::setprecision(3);
  out << "model        total   " << kBinNames[0] << "   " << kBinNames[1] << "     "
      << kBinNames[2] << '\n';
  out << std::left << std::setw(12) << label << ' ' << std::right << std::setw(6)
      << r.total_bpc;
  for (const auto& b : r.bins) out << "  " << std::setw(7) << b.bpc();
  out << '\n';
  out << "tokens per bin:";
  for (const auto& b : r.bins) out << ' ' << b.tokens;
  out << "  (EOS " << r.eos_tokens << ")\n";
  out << "characters (original): " << r.char_count_original << '\n';
  out << "articles: " << r.article_bpc.size() << '\n';
  out.unsetf(std::ios::floatfield);
}

void write_report_kv(std::ostream& out, const EvalReport& r) {
  out << std::setprecision(17);
  out << "total_bpc = " << r.total_bpc << '\n';
  out << "total_bits = " << r.total_bits << '\n';
  out << "char_count_original = " << r.char_count_original << '\n';
  out << "tokens = " << r.tokens << '\n';
  out << "eos_tokens = " << r.eos_tokens << '\n';
  out << "eos_bits = " << r.eos_bits << '\n';
  for (std::size_t i = 0; i < kNumFrequencyBins; ++i) {
    out << "bin." << kBinNames[i] << ".bpc = " << r.bins[i].bpc() << '\n';
    out << "bin." << kBinNames[i] << ".tokens = " << r.bins[i].tokens << '\n';
    out << "bin." << kBinNames[i] << ".chars = " << r.bins[i].chars << '\n';
    out << "bin." << kBinNames[i] << ".bits = " << r.bins[i].bits << '\n';
  }
  out << "articles = " << r.article_bpc.size() << '\n';
  for (std::size_t i = 0; i < r.article_bpc.size(); ++i) {
    out << "article." << i << ".bpc = " << r.article_bpc[i] << '\n';
  }
}

}  // namespace ovlm
