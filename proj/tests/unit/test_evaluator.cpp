#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>

#include "support/toy.hpp"
#include "ovlm/bpe.hpp"
#include "ovlm/evaluator.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/trainer.hpp"
#include "ovlm/unicode.hpp"

using namespace ovlm;
using namespace ovlm::testing;

namespace {

void zero_lm(ModelBundle& m) {
  for (auto& p : m.lm->parameters())
    for (double& v : p.tensor.values()) v = 0.0;
}

void randomize(std::vector<Parameter>& params, Rng& rng, double range) {
  for (auto& p : params)
    for (double& v : p.tensor.values()) v = rng.uniform(-range, range);
}

}  // namespace

TEST(CorpusBpc, UniformOver128UnitsIsSevenBits) {
  // 125 letters, the separator unit and the two specials: 128 units. With
  // every word followed by one space, each raw character is exactly one unit.
  std::u32string letters;
  for (char32_t c = 0x100; letters.size() < 125; ++c) letters.push_back(c);
  Rng rng(1);
  std::u32string text;
  for (int line = 0; line < 30; ++line) {
    const std::size_t words = 1 + rng.index(6);
    for (std::size_t w = 0; w < words; ++w) {
      const std::size_t len = 1 + rng.index(7);
      for (std::size_t k = 0; k < len; ++k) text += letters[rng.index(letters.size())];
      text += U' ';
    }
    text += U'\n';
  }
  text += letters;  // make sure every letter occurs
  text += U" \n";
  const std::string utf8 = utf8_encode(text);
  const Lexicon units = build_char_vocab(utf8);
  ASSERT_EQ(units.size(), 128u);
  const auto seg = segment_chars(utf8, units);
  ASSERT_EQ(seg.units.size(), seg.units.char_count_original);

  TrainConfig cfg = toy_config(ModelFamily::kPureChar);
  Rng init(2);
  ModelBundle m = ModelBundle::create(cfg, units, SpellAlphabet::from_text(utf8), init);
  zero_lm(m);
  const auto rep = corpus_bpc(m, seg, {});
  EXPECT_NEAR(rep.total_bpc, 7.0, 1e-12);
  EXPECT_NEAR(rep.total_bits, 7.0 * static_cast<double>(utf8_length(utf8)), 1e-8);
}

TEST(TokenLogprob, OovAddsSpellingTerm) {
  // p_LM(UNK) = 1/8 from a zero LM over 8 lexemes; a uniform 1gram speller
  // over {a, EOW} gives "aaaa" probability 2^-5.
  std::string text;
  for (const char* w : {"ba", "bb", "bab", "abb", "aab", "bba"}) text += std::string(w) + " ";
  text += "\n";
  ToyData d = make_toy(text, 6);
  ASSERT_EQ(d.lexicon.size(), 8u);
  Rng init(3);
  ModelBundle m = ModelBundle::create(toy_config(ModelFamily::kUnigram), d.lexicon,
                                      SpellAlphabet(std::set<char32_t>{U'a'}), init);
  zero_lm(m);
  for (auto& p : m.speller->parameters())
    for (double& v : p.tensor.values()) v = 0.0;
  const LmStepResult step = m.lm->step(kEosId, m.lm->initial_state());
  const double lp = token_logprob(m, kUnkId, "aaaa", step);
  EXPECT_NEAR(-lp / std::numbers::ln2, 8.0, 1e-12);
  EXPECT_NEAR(-token_logprob(m, kEosId, "\n", step) / std::numbers::ln2, 3.0, 1e-12);
  EXPECT_THROW(token_logprob(m, 8, "x", step), std::invalid_argument);
}

TEST(TokenLogprob, EnumerationOracle) {
  // |V| = 3 (UNK, EOS, one word); alphabet {a, b}.
  ToyData d = make_toy("ab\n", 1);
  ASSERT_EQ(d.lexicon.size(), 3u);
  TrainConfig cfg = toy_config(ModelFamily::kFull);
  Rng init(4);
  ModelBundle m =
      ModelBundle::create(cfg, d.lexicon, SpellAlphabet(std::set<char32_t>{U'a', U'b'}), init);
  Rng rng(5);
  auto lp = m.lm->parameters();
  randomize(lp, rng, 0.8);
  randomize(m.speller->parameters(), rng, 1.2);
  const LmStepResult step = m.lm->step(kEosId, m.lm->initial_state());

  // Independent pieces: softmax by hand, spelling by chaining next-symbol
  // distributions.
  double z = 0.0;
  for (double l : step.logits) z += std::exp(l);
  const double p_unk = std::exp(step.logits[kUnkId]) / z;
  double mass = 0.0;
  std::function<void(std::u32string)> walk = [&](std::u32string s) {
    double p = p_unk;
    for (std::size_t i = 0; i <= s.size(); ++i) {
      const auto dist = m.speller->next_distribution(s.substr(0, i), step.hidden);
      p *= i < s.size() ? dist[m.alphabet.index(s[i])] : dist[m.alphabet.eow()];
    }
    const double got = token_logprob(m, kUnkId, utf8_encode(s), step);
    EXPECT_NEAR(got, std::log(p), 1e-10) << utf8_encode(s);
    EXPECT_LE(got, std::log(p_unk));
    mass += std::exp(got);
    if (s.size() < 3) {
      walk(s + U"a");
      walk(s + U"b");
    }
  };
  walk(U"");
  EXPECT_LE(mass, p_unk);
}

TEST(CorpusBpc, AccountingIdentityAndThreadedState) {
  Rng data_rng(6);
  const std::string train = toy_corpus(data_rng, 300);
  // Every word followed by one separator, so bin characters partition the
  // raw character count.
  std::string dev;
  for (char c : toy_corpus(data_rng, 200, 60)) {
    if (c == '\n') dev += ' ';
    dev += c;
  }
  ToyData d = make_toy(train, 15);
  ModelBundle m = make_models(toy_config(ModelFamily::kFull), d);
  Rng rng(8);
  auto lp = m.lm->parameters();
  randomize(lp, rng, 0.5);
  const EncodedCorpus enc = encode_corpus(dev, d.lexicon);
  const auto rep = corpus_bpc(m, enc);

  double bits = rep.eos_bits;
  std::size_t chars = rep.eos_tokens, tokens = rep.eos_tokens;
  for (const auto& b : rep.bins) {
    bits += b.bits;
    chars += b.chars;
    tokens += b.tokens;
  }
  EXPECT_NEAR(bits, rep.total_bpc * static_cast<double>(rep.char_count_original), 1e-9);
  EXPECT_EQ(chars, rep.char_count_original);
  EXPECT_EQ(tokens, rep.tokens);
  EXPECT_GT(rep.bins[0].tokens, 0u);

  // Step-by-step oracle with explicit state threading.
  LmState s = m.lm->initial_state();
  LexemeId prev = kEosId;
  double total = 0.0;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const auto r = lm_step(*m.lm, prev, s);
    double lp_i = ops::log_softmax(r.logits)[enc.ids[i]];
    if (enc.ids[i] == kUnkId) lp_i += m.speller->logprob(utf8_decode(enc.surface[i]), r.hidden);
    total -= lp_i / std::numbers::ln2;
    s = r.state;
    prev = enc.ids[i];
  }
  EXPECT_NEAR(total, rep.total_bits, 1e-9);
}

TEST(CorpusBpc, UnitBaselineSumsUnitsPerToken) {
  Rng data_rng(9);
  const std::string train = toy_corpus(data_rng, 300);
  const auto table = learn_merges(train, 20).table;
  const Lexicon units = build_unit_vocab(train, table);
  const auto seg = segment_corpus(train, table, units);
  Rng init(10);
  ModelBundle m = ModelBundle::create(toy_config(ModelFamily::kPureBpe), units,
                                      SpellAlphabet::from_text(train), init);
  const auto per_token = score_tokens(m, seg);
  ASSERT_EQ(per_token.size(), seg.token_spans.size());
  LmState s = m.lm->initial_state();
  LexemeId prev = kEosId;
  std::vector<double> unit_lp;
  for (LexemeId id : seg.units.ids) {
    const auto r = lm_step(*m.lm, prev, s);
    unit_lp.push_back(ops::log_softmax(r.logits)[id]);
    s = r.state;
    prev = id;
  }
  for (std::size_t t = 0; t < seg.token_spans.size(); ++t) {
    double sum = 0.0;
    for (std::size_t i = seg.token_spans[t].first; i < seg.token_spans[t].second; ++i) sum += unit_lp[i];
    EXPECT_NEAR(per_token[t], sum, 1e-12);
  }
  const Lexicon words = Lexicon::build(collect_tokens(train).tokens, 1000);
  const auto rep = corpus_bpc(m, seg, words.type_counts());
  EXPECT_EQ(rep.bins[0].tokens, 0u);  // every evaluated word was seen in training
  EXPECT_GT(rep.total_bpc, 0.0);
}

TEST(ArticleStarts, HeadingsSplitArticles) {
  const std::string text =
      " = Alpha = \n a b\n\n = = Sub = = \n c\n\n = Beta = \n d e\n";
  const Lexicon lex = Lexicon::build(collect_tokens(text).tokens, 100);
  const auto enc = encode_corpus(text, lex);
  const auto starts = article_starts(enc);
  ASSERT_EQ(starts.size(), 2u);
  EXPECT_EQ(starts[0], 0u);
  // Beta's article begins at the blank line before its heading.
  EXPECT_EQ(enc.ids[starts[1]], kEosId);
  EXPECT_EQ(enc.surface[starts[1] + 1], "=");
  EXPECT_EQ(enc.surface[starts[1] + 2], "Beta");
}

TEST(Summarize, ArticlesPartitionBits) {
  const std::vector<double> lp = {-1.0, -2.0, -3.0, -4.0};
  const std::vector<std::string> surf = {"ab", "\n", "c", "\n"};
  const std::vector<LexemeId> ids = {2, kEosId, kUnkId, kEosId};
  const std::size_t starts[] = {0, 2};
  const auto r = summarize(lp, surf, ids, {{"ab", 150}}, 7, starts);
  ASSERT_EQ(r.article_bpc.size(), 2u);
  EXPECT_NEAR(r.article_bpc[0], 3.0 / std::numbers::ln2 / 4.0, 1e-12);
  EXPECT_NEAR(r.article_bpc[1], 7.0 / std::numbers::ln2 / 3.0, 1e-12);
  EXPECT_EQ(r.bins[2].tokens, 1u);
  EXPECT_EQ(r.bins[0].chars, 2u);
  std::ostringstream kv;
  write_report_kv(kv, r);
  EXPECT_NE(kv.str().find("article.1.bpc = "), std::string::npos);
  EXPECT_NE(kv.str().find("bin.frequent.tokens = 1"), std::string::npos);
}

TEST(PermutationTest, IdenticalListsGiveOne) {
  Rng rng(11);
  const std::vector<double> a = {1.2, 1.5, 1.1, 1.7};
  EXPECT_DOUBLE_EQ(permutation_test(a, a, 100000, rng), 1.0);
  const std::vector<double> many(64, 1.3);
  EXPECT_DOUBLE_EQ(permutation_test(many, many, 1000, rng), 1.0);
}

TEST(PermutationTest, ThreeArticlesByHand) {
  // Differences 1, 2, 3: of the 8 sign patterns only +++ and --- reach |6|.
  Rng rng(12);
  const std::vector<double> a = {2.0, 3.0, 4.0}, b = {1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(permutation_test(a, b, 8, rng), 0.25);
  // Differences 1, 1, 3: |sum| >= 5 only for +++ and ---; |1+1-3| = 1.
  const std::vector<double> c = {2.0, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(permutation_test(c, b, 100, rng), 0.25);
}

TEST(PermutationTest, SymmetricAndRejectsMismatch) {
  Rng rng(13);
  std::vector<double> a(10), b(10);
  for (std::size_t i = 0; i < 10; ++i) {
    a[i] = rng.uniform(1.0, 2.0);
    b[i] = a[i] + rng.uniform(-0.05, 0.1);
  }
  EXPECT_DOUBLE_EQ(permutation_test(a, b, 5000, rng), permutation_test(b, a, 5000, rng));
  EXPECT_THROW(permutation_test(a, std::span(b).first(9), 10, rng), std::invalid_argument);
}

TEST(PermutationTest, DominantSystemOverSixtyFourArticles) {
  Rng rng(14);
  std::vector<double> a(64), b(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = rng.uniform(1.4, 1.6);
    b[i] = a[i] + rng.uniform(0.02, 0.05);
  }
  EXPECT_LT(permutation_test(a, b, 100000, rng), 0.011);
}

TEST(PermutationTest, MonteCarloConvergesToExhaustive) {
  Rng rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a(12), b(12);
    for (std::size_t i = 0; i < 12; ++i) {
      a[i] = rng.uniform(1.0, 2.0);
      b[i] = a[i] + rng.uniform(-0.1, 0.15);
    }
    const double exact = permutation_test(a, b, 4096, rng);
    const std::size_t trials = 4000;  // below 2^12: Monte-Carlo
    const double mc = permutation_test(a, b, trials, rng);
    const double sd = std::sqrt(std::max(exact * (1.0 - exact), 1e-4) / trials);
    EXPECT_NEAR(mc, exact, 3.0 * sd + 1.0 / trials) << trial;
  }
}
