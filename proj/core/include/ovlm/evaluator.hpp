#pragma once

// Bits-per-character evaluation with frequency bins and per-article
// breakdown, open-vocabulary token scoring, and a paired permutation test.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ovlm/bpe.hpp"
#include "ovlm/lexeme_lm.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/models.hpp"
#include "ovlm/random.hpp"

namespace ovlm {

struct BinStats {
  std::size_t tokens = 0;
  std::size_t chars = 0;
  double bits = 0.0;
  double bpc() const { return chars ? bits / static_cast<double>(chars) : 0.0; }
};

struct EvalReport {
  double total_bits = 0.0;
  double total_bpc = 0.0;
  std::size_t char_count_original = 0;
  std::size_t tokens = 0;     // all scored tokens, EOS included
  std::size_t eos_tokens = 0;
  double eos_bits = 0.0;
  std::array<BinStats, kNumFrequencyBins> bins;
  std::vector<double> article_bpc;
};

// Natural-log probability of one token given the LM step that predicts it.
// OOV tokens add the spelling log-probability conditioned on the step's
// hidden state; nothing is renormalized.
double token_logprob(const ModelBundle& models, LexemeId id, std::string_view surface,
                     const LmStepResult& step);

// Per-token natural-log probabilities of a word-level corpus under a hybrid
// model, streamed with threaded state from an initial EOS.
std::vector<double> score_tokens(const ModelBundle& models, const EncodedCorpus& corpus);

// Per-token log-probabilities under a unit-level baseline: the sum over
// the token's units.
std::vector<double> score_tokens(const ModelBundle& models, const SegmentedCorpus& corpus);

// Token indices that start an article: lines of the form "= Title =".
// Always contains 0 for a non-empty corpus.
std::vector<std::size_t> article_starts(const EncodedCorpus& corpus);

// Aggregates per-token log-probabilities. `surfaces` and `is_eos` describe
// the tokens; bins use training type counts.
EvalReport summarize(std::span<const double> logprobs, std::span<const std::string> surfaces,
                     std::span<const LexemeId> ids,
                     const std::unordered_map<std::string, std::uint64_t>& train_type_counts,
                     std::size_t char_count_original,
                     std::span<const std::size_t> article_begins);

EvalReport corpus_bpc(const ModelBundle& models, const EncodedCorpus& dev);
EvalReport corpus_bpc(const ModelBundle& models, const SegmentedCorpus& dev,
                      const std::unordered_map<std::string, std::uint64_t>& train_type_counts);

// Two-sided paired sign-flip test on a - b. Exhaustive when 2^n <= trials,
// otherwise Monte-Carlo with the observed assignment counted once.
double permutation_test(std::span<const double> a, std::span<const double> b,
                        std::size_t trials, Rng& rng);

// The two strategies on their own. The exhaustive one enumerates all 2^n
// sign patterns and requires n < 32.
double permutation_test_exhaustive(std::span<const double> a, std::span<const double> b);
double permutation_test_monte_carlo(std::span<const double> a, std::span<const double> b,
                                    std::size_t trials, Rng& rng);

void write_report_table(std::ostream& out, const EvalReport& r, std::string_view label);
void write_report_kv(std::ostream& out, const EvalReport& r);

}  // namespace ovlm
