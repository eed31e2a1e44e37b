#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>

#include "ovlm/linalg.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/speller.hpp"

using namespace ovlm;

namespace {

SpellerConfig tiny_config(SpellerVariant v = SpellerVariant::kFull, std::size_t cond = 3) {
  SpellerConfig c;
  c.variant = v;
  c.cond_dim = cond;
  c.char_emb_dim = 3;
  c.hidden = 4;
  c.layers = 2;
  return c;
}

const SpellAlphabet& ab() {
  static const SpellAlphabet a(std::set<char32_t>{U'a', U'b'});
  return a;
}

// Bigger weights than the default init so the distributions are far from
// uniform and the enumeration checks have something to bite on.
void scramble(Speller& sp, Rng& rng, double range = 1.5) {
  for (auto& p : sp.parameters())
    for (double& v : p.tensor.values()) v = rng.uniform(-range, range);
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST(SpellAlphabet, IndexingAndSerialization) {
  const SpellAlphabet a = SpellAlphabet::from_text("ba c\né");
  EXPECT_TRUE(a.contains(U'a'));
  EXPECT_TRUE(a.contains(U'◇'));
  EXPECT_FALSE(a.contains(U' '));
  EXPECT_EQ(a.eow(), static_cast<std::int64_t>(a.size()));
  EXPECT_EQ(a.char_at(a.index(U'c')), U'c');
  EXPECT_THROW(a.index(U'z'), std::invalid_argument);
  EXPECT_EQ(a.coerce(U"az"), U"a◇");
  EXPECT_EQ(SpellAlphabet::deserialize(a.serialize()).chars(), a.chars());
}

TEST(Speller, RejectsCharactersOutsideAlphabet) {
  Rng rng(1);
  Speller sp(tiny_config(), ab(), rng);
  const std::vector<double> cond(3, 0.0);
  EXPECT_THROW(sp.logprob(U"abc", cond), std::invalid_argument);
  EXPECT_THROW(sp.logprob(U"ab", std::vector<double>(2, 0.0)), std::invalid_argument);
}

TEST(Speller, UnigramUniformGivesProductOfUniforms) {
  Rng rng(2);
  const SpellAlphabet abc(std::set<char32_t>{U'a', U'b', U'c'});
  Speller sp(tiny_config(SpellerVariant::kUnigram), abc, rng);
  for (auto& p : sp.parameters()) for (double& v : p.tensor.values()) v = 0.0;
  const std::vector<double> cond = random_vec(3, rng);
  const double m = 4.0;
  for (std::u32string w : {U"", U"a", U"abc", U"cccccc"}) {
    EXPECT_NEAR(sp.logprob(w, cond), (w.size() + 1.0) * std::log(1.0 / m), 1e-12);
  }
  EXPECT_DOUBLE_EQ(sp.nuclear_penalty().item(), 0.0);
}

TEST(Speller, UnigramMassOverAllStringsIsOne) {
  // With q(EOW) = e, total mass is sum_L (1-e)^L e = 1; the partial sums
  // up to length K equal 1 - (1-e)^(K+1).
  Rng rng(3);
  Speller sp(tiny_config(SpellerVariant::kUnigram), ab(), rng);
  scramble(sp, rng);
  const std::vector<double> cond(3, 0.0);
  const auto q = sp.next_distribution(U"", cond);
  const double eow = q[2];
  double mass = 0.0;
  std::function<void(std::u32string)> walk = [&](std::u32string s) {
    mass += std::exp(sp.logprob(s, cond));
    if (s.size() < 8) {
      walk(s + U"a");
      walk(s + U"b");
    }
  };
  walk(U"");
  EXPECT_NEAR(mass, 1.0 - std::pow(1.0 - eow, 9), 1e-12);
}

TEST(Speller, UncondIgnoresConditioningExactly) {
  Rng rng(4);
  Speller sp(tiny_config(SpellerVariant::kUncond), ab(), rng);
  scramble(sp, rng);
  for (int i = 0; i < 20; ++i) {
    const auto c1 = random_vec(3, rng), c2 = random_vec(3, rng);
    EXPECT_EQ(sp.logprob(U"abba", c1), sp.logprob(U"abba", c2));
  }
}

TEST(Speller, FullDependsOnConditioning) {
  Rng rng(5);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng);
  EXPECT_NE(sp.logprob(U"ab", random_vec(3, rng)), sp.logprob(U"ab", random_vec(3, rng)));
}

TEST(Speller, EnumerationMassAtMostOneAndStepsNormalized) {
  Rng rng(6);
  for (auto v : {SpellerVariant::kFull, SpellerVariant::kUncond}) {
    Speller sp(tiny_config(v), ab(), rng);
    scramble(sp, rng);
    const auto cond = random_vec(3, rng);
    double mass = 0.0;
    std::function<void(std::u32string)> walk = [&](std::u32string s) {
      const auto d = sp.next_distribution(s, cond);
      double total = 0.0;
      for (double p : d) total += p;
      ASSERT_NEAR(total, 1.0, 1e-12);
      // logprob(s) = sum of stepwise log probabilities including EOW.
      double chain = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        chain += std::log(sp.next_distribution(s.substr(0, i), cond)[ab().index(s[i])]);
      chain += std::log(d[ab().eow()]);
      ASSERT_NEAR(sp.logprob(s, cond), chain, 1e-10);
      mass += std::exp(chain);
      if (s.size() < 8) {
        walk(s + U"a");
        walk(s + U"b");
      }
    };
    walk(U"");
    EXPECT_LE(mass, 1.0 + 1e-12);
    EXPECT_GT(mass, 0.0);
  }
}

TEST(Speller, BatchedNllMatchesPerWordLogprob) {
  Rng rng(7);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng, 0.8);
  const std::vector<std::u32string> words = {U"a", U"", U"abbab", U"ba"};
  Tensor conds = Tensor::zeros(words.size(), 3);
  for (double& v : conds.values()) v = rng.uniform(-1.0, 1.0);
  double expect = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    expect -= sp.logprob(words[i], conds.values().subspan(i * 3, 3));
  }
  EXPECT_NEAR(sp.nll(words, conds, false, rng).item(), expect, 1e-10);
}

TEST(Speller, TemperatureScalesLogits) {
  Rng rng(8);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng);
  const auto cond = random_vec(3, rng);
  const auto p1 = sp.next_distribution(U"ab", cond, 1.0);
  const auto p2 = sp.next_distribution(U"ab", cond, 0.5);
  // p_T proportional to p^(1/T).
  double z = 0.0;
  for (double p : p1) z += p * p;
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p2[i], p1[i] * p1[i] / z, 1e-12);
}

TEST(TypeSpellingLoss, FullBatchIsExactAndLongSpellingsSkipped) {
  Rng rng(9);
  Speller sp(tiny_config(), ab(), rng);
  const std::string long_word(21, 'a');
  const std::vector<std::string> toks = {"ab", "ba", "ab", long_word};
  const Lexicon lex = Lexicon::build(toks, 10);
  Tensor emb = Tensor::zeros(lex.size(), 3);
  for (double& v : emb.values()) v = rng.uniform(-1.0, 1.0);
  std::vector<LexemeId> all;
  double expect = 0.0;
  for (std::size_t id = kNumSpecialLexemes; id < lex.size(); ++id) {
    all.push_back(static_cast<LexemeId>(id));
    const std::string& s = lex.spelling(id);
    if (s.size() <= kMaxTypeSpellingLength)
      expect -= sp.logprob(std::u32string(s.begin(), s.end()), emb.values().subspan(id * 3, 3));
  }
  EXPECT_NEAR(type_spelling_loss(sp, lex, emb, all, false, rng).item(), expect, 1e-10);

  const LexemeId long_id = lex.lookup(long_word);
  const LexemeId only_long[] = {long_id};
  EXPECT_DOUBLE_EQ(type_spelling_loss(sp, lex, emb, only_long, false, rng).item(), 0.0);

  EXPECT_THROW(type_spelling_loss(sp, lex, emb, {}, false, rng), std::invalid_argument);
  const LexemeId special[] = {kUnkId};
  EXPECT_THROW(type_spelling_loss(sp, lex, emb, special, false, rng), std::invalid_argument);
}

TEST(TypeSpellingLoss, HalfBatchesAreUnbiased) {
  Rng rng(10);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng, 0.8);
  std::vector<std::string> toks;
  for (int i = 0; i < 12; ++i) {
    std::string w;
    const int len = 1 + static_cast<int>(rng.index(5));
    for (int k = 0; k < len; ++k) w += rng.bernoulli(0.5) ? 'a' : 'b';
    toks.push_back(w);
  }
  const Lexicon lex = Lexicon::build(toks, 100);
  Tensor emb = Tensor::zeros(lex.size(), 3);
  for (double& v : emb.values()) v = rng.uniform(-1.0, 1.0);
  std::vector<LexemeId> all;
  for (std::size_t id = kNumSpecialLexemes; id < lex.size(); ++id) all.push_back(id);
  const double full = type_spelling_loss(sp, lex, emb, all, false, rng).item();

  const std::size_t half = all.size() / 2;
  double sum = 0.0, sq = 0.0;
  const int n = 1000;
  for (int r = 0; r < n; ++r) {
    std::shuffle(all.begin(), all.end(), rng.engine());
    const double est = type_spelling_loss(sp, lex, emb, std::span(all).first(half), false, rng).item();
    sum += est;
    sq += est * est;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::fabs(mean - full), 3.0 * se + 1e-12) << "mean " << mean << " full " << full;
}

TEST(UnkSpellingLoss, DefinitionAndErrors) {
  Rng rng(11);
  Speller sp(tiny_config(), ab(), rng);
  EXPECT_DOUBLE_EQ(unk_spelling_loss(sp, {}, false, rng).item(), 0.0);
  Tensor h = Tensor::from(1, 3, {0.3, -0.2, 0.9});
  const UnkItem one[] = {{h, U"bab"}};
  EXPECT_NEAR(unk_spelling_loss(sp, one, false, rng).item(), -sp.logprob(U"bab", h.values()),
              1e-12);
  const UnkItem bad[] = {{Tensor::zeros(1, 2), U"a"}};
  EXPECT_THROW(unk_spelling_loss(sp, bad, false, rng), std::invalid_argument);
}

TEST(NuclearPenalty, ZeroIdentityAndPerBlockOracle) {
  Rng rng(12);
  SpellerConfig cfg = tiny_config(SpellerVariant::kFull, 4);
  cfg.nuclear_coef = 2.5;
  Speller sp(cfg, ab(), rng);
  Tensor w_cond;
  for (auto& p : sp.parameters())
    if (p.name == "speller.l0.w_cond") w_cond = p.tensor;
  ASSERT_TRUE(w_cond.defined());
  const std::size_t h = cfg.hidden;

  for (double& v : w_cond.values()) v = 0.0;
  EXPECT_DOUBLE_EQ(sp.nuclear_penalty().item(), 0.0);

  // Identity in the first gate block (4 x 4), zero elsewhere.
  for (std::size_t i = 0; i < 4; ++i) w_cond.at(i, i) = 1.0;
  EXPECT_NEAR(sp.nuclear_penalty().item(), 4.0 * 2.5, 1e-10);

  for (double& v : w_cond.values()) v = rng.uniform(-1.0, 1.0);
  double oracle = 0.0;
  for (std::size_t g = 0; g < 4; ++g) {
    std::vector<double> block(4 * h);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < h; ++c) block[r * h + c] = w_cond.at(r, g * h + c);
    const auto svd = thin_svd(block, 4, h);
    for (double s : svd.singular_values) oracle += s;
  }
  EXPECT_NEAR(sp.nuclear_penalty().item(), 2.5 * oracle, 1e-9);
  EXPECT_EQ(sp.conditioning_blocks().size(), 4u);
}

TEST(Sampling, GreedyIsTemperatureInvariantAndSeeded) {
  Rng rng(13);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng);
  for (int i = 0; i < 10; ++i) {
    const auto cond = random_vec(3, rng);
    const auto g = sp.greedy(cond, 1.0, 30);
    for (double t : {0.01, 0.5, 3.0}) EXPECT_EQ(sp.greedy(cond, t, 30).spelling, g.spelling);
    Rng a(99), b(99);
    EXPECT_EQ(sp.sample(cond, 1e-7, 30, a).spelling, g.spelling);
    EXPECT_EQ(sample_spelling(sp, cond, 0.75, 30, a).spelling,
              (sp.sample(cond, 1e-7, 30, b), sp.sample(cond, 0.75, 30, b).spelling));
  }
  const auto cond = random_vec(3, rng);
  Rng a(5), b(5);
  for (int i = 0; i < 20; ++i)
    EXPECT_EQ(sp.sample(cond, 0.75, 30, a).spelling, sp.sample(cond, 0.75, 30, b).spelling);
  EXPECT_THROW(sp.sample(cond, 0.0, 30, a), std::invalid_argument);
}

TEST(Sampling, TruncationFlag) {
  Rng rng(14);
  Speller sp(tiny_config(SpellerVariant::kUnigram), ab(), rng);
  for (auto& p : sp.parameters()) for (double& v : p.tensor.values()) v = 0.0;
  auto u = sp.parameters()[0].tensor.values();
  u[2] = -50.0;  // EOW essentially never
  const std::vector<double> cond(3, 0.0);
  const auto s = sp.sample(cond, 1.0, 7, rng);
  EXPECT_TRUE(s.truncated);
  EXPECT_EQ(s.spelling.size(), 7u);
}

TEST(Sampling, EmpiricalFrequenciesMatchModel) {
  Rng rng(15);
  Speller sp(tiny_config(), ab(), rng);
  scramble(sp, rng, 1.0);
  const auto cond = random_vec(3, rng);
  const auto first = sp.next_distribution(U"", cond);
  const auto after_a = sp.next_distribution(U"a", cond);
  const int n = 100000;
  std::array<int, 3> c1{}, c2{};
  int n_a = 0;
  Rng sampler(16);
  for (int i = 0; i < n; ++i) {
    const auto s = sp.sample(cond, 1.0, 40, sampler).spelling;
    if (s.empty()) ++c1[2];
    else ++c1[ab().index(s[0])];
    if (!s.empty() && s[0] == U'a') {
      ++n_a;
      if (s.size() == 1) ++c2[2];
      else ++c2[ab().index(s[1])];
    }
  }
  for (int k = 0; k < 3; ++k) {
    const double sd1 = std::sqrt(first[k] * (1 - first[k]) / n);
    EXPECT_NEAR(static_cast<double>(c1[k]) / n, first[k], 3 * sd1 + 1e-12) << k;
    const double sd2 = std::sqrt(after_a[k] * (1 - after_a[k]) / n_a);
    EXPECT_NEAR(static_cast<double>(c2[k]) / n_a, after_a[k], 3 * sd2 + 1e-12) << k;
  }
}

TEST(Speller, CheckpointRoundTrip) {
  Rng rng(17);
  Speller a(tiny_config(), ab(), rng, "sp");
  Checkpoint ck;
  a.save(ck);
  EXPECT_EQ(ck.meta("sp.variant"), "full");
  Speller b(tiny_config(), ab(), rng, "sp");
  b.load(ck);
  const auto cond = random_vec(3, rng);
  // Stored as float: compare against a model built from the same floats.
  Checkpoint ck2;
  b.save(ck2);
  Speller c(tiny_config(), ab(), rng, "sp");
  c.load(ck2);
  EXPECT_EQ(b.logprob(U"ab", cond), c.logprob(U"ab", cond));
  EXPECT_NEAR(a.logprob(U"ab", cond), b.logprob(U"ab", cond), 1e-5);
  Speller wrong(tiny_config(SpellerVariant::kUnigram), ab(), rng, "sp");
  EXPECT_THROW(wrong.load(ck), CheckpointError);
}
