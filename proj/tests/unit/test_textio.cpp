#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "ovlm/char_alphabet.hpp"
#include "ovlm/random.hpp"
#include "ovlm/tokenizer.hpp"
#include "ovlm/unicode.hpp"
#include "support/fuzz.hpp"

using namespace ovlm;
using ovlm::testing::random_char;

namespace {

const std::string kM = utf8_encode(kDefaultMergeSymbol);

std::string with_merge(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += kM;
    else out += c;
  }
  return out;
}

}  // namespace

TEST(IsWeird, CategoryExamples) {
  EXPECT_FALSE(is_weird(U'a'));
  EXPECT_TRUE(is_weird(U','));
  EXPECT_FALSE(is_weird(U' '));
  EXPECT_FALSE(is_weird(U'7'));
  EXPECT_FALSE(is_weird(U'́'));  // Mn
  EXPECT_FALSE(is_weird(U'Ⅻ'));       // Nl
  EXPECT_TRUE(is_weird(U'$'));
  EXPECT_TRUE(is_weird(kDefaultMergeSymbol));
  EXPECT_TRUE(is_weird(U'\u0007'));  // Cc but not space
}

TEST(IsSpace, IncludesSeparatorControls) {
  for (char32_t c : {U'\t', U'\n', U'\v', U'\f', U'\r', U'\u001c', U'\u001d', U'\u001e',
                     U'\u001f', U'\u0085', U' ', U' ', U'　'}) {
    EXPECT_TRUE(is_space(c)) << static_cast<unsigned>(c);
    EXPECT_FALSE(is_weird(c)) << static_cast<unsigned>(c);
  }
  EXPECT_FALSE(is_space(U'​'));  // zero width space is Cf, not White_Space
}

TEST(Tokenizer, HouseholdsSentence) {
  const Tokenizer tok;
  const std::string in = "Some of 100,000 households (usually, a minority) ate breakfast.";
  const std::string expect =
      with_merge("Some of 100 |,| 000 households (| usually |, a minority |) ate breakfast |.");
  EXPECT_EQ(tok.tokenize(in), expect);
  EXPECT_EQ(tok.detokenize(expect), in);
}

TEST(Tokenizer, SmallExamples) {
  const Tokenizer tok;
  EXPECT_EQ(tok.tokenize(std::string()), "");
  EXPECT_EQ(tok.tokenize(std::string("a-b")), with_merge("a |-| b"));
  EXPECT_EQ(tok.tokenize(std::string("a b")), "a b");
  // A weird character after a weird character is split on the left only.
  EXPECT_EQ(tok.tokenize(std::string("a?!")), with_merge("a |? |!"));
  EXPECT_EQ(tok.detokenize(with_merge("a |? |!")), "a?!");
  EXPECT_EQ(tok.detokenize(std::string("plain text, no marks")), "plain text, no marks");
}

TEST(Tokenizer, RejectsMergeSymbolInInput) {
  const Tokenizer tok;
  EXPECT_THROW(tok.tokenize("a" + kM + "b"), TokenizeError);
}

TEST(Tokenizer, MergeSymbolMustBeWeird) {
  EXPECT_THROW(Tokenizer(TokenizerConfig{U'x'}), std::invalid_argument);
  const Tokenizer custom(TokenizerConfig{U'¦'});
  EXPECT_EQ(custom.tokenize(std::string("a,b")), "a ¦,¦ b");
  EXPECT_EQ(custom.detokenize(std::string("a ¦,¦ b")), "a,b");
}

TEST(Tokenizer, FuzzedRoundTripAndScanProperties) {
  const Tokenizer tok;
  Rng rng(77);
  for (int trial = 0; trial < 10000; ++trial) {
    std::u32string x;
    const std::size_t len = rng.index(24);
    for (std::size_t i = 0; i < len; ++i) x.push_back(random_char(rng));
    const std::u32string t = tok.tokenize(std::u32string_view(x));
    ASSERT_EQ(tok.detokenize(std::u32string_view(t)), x) << utf8_encode(x);

    // Deleting inserted material (merge symbols and the spaces next to
    // them that are not in x) must give back x in order; check the
    // subsequence property and merge adjacency.
    std::size_t j = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == kDefaultMergeSymbol) {
        const bool left_weird = i > 0 && is_weird(t[i - 1]) && t[i - 1] != kDefaultMergeSymbol;
        const bool right_weird =
            i + 1 < t.size() && is_weird(t[i + 1]) && t[i + 1] != kDefaultMergeSymbol;
        ASSERT_TRUE(left_weird || right_weird) << utf8_encode(x);
        continue;
      }
      if (j < x.size() && t[i] == x[j]) ++j;
    }
    ASSERT_EQ(j, x.size()) << utf8_encode(x);
  }
}

TEST(Utf8, RoundTripAndErrors) {
  const std::u32string s = U"aé中😀";
  EXPECT_EQ(utf8_decode(utf8_encode(s)), s);
  EXPECT_EQ(utf8_length(utf8_encode(s)), 4u);
  EXPECT_THROW(utf8_decode("\xff"), Utf8Error);
  EXPECT_THROW(utf8_decode("\xc3"), Utf8Error);          // truncated
  EXPECT_THROW(utf8_decode("\xed\xa0\x80"), Utf8Error);  // surrogate
  EXPECT_THROW(utf8_decode("\xc0\xaf"), Utf8Error);      // overlong
}

TEST(CharAlphabet, ThresholdBoundary) {
  std::string train;
  for (int i = 0; i < 24; ++i) train += "x";
  for (int i = 0; i < 25; ++i) train += "y";
  const auto norm = normalize_rare_chars(train, {"xyz"}, 25);
  EXPECT_FALSE(norm.alphabet.contains(U'x'));
  EXPECT_TRUE(norm.alphabet.contains(U'y'));
  EXPECT_FALSE(norm.alphabet.contains(U'z'));
  EXPECT_EQ(norm.others[0], "◇y◇");
  EXPECT_EQ(utf8_length(norm.train), 49u);
  EXPECT_EQ(norm.train.find('x'), std::string::npos);
  EXPECT_FALSE(norm.alphabet.contains(kRareCharSymbol));
}

TEST(CharAlphabet, NewlineSurvivesAndAlphabetGrowsByAtMostOne) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::u32string train;
    for (int i = 0; i < 300; ++i) train.push_back(U"abcdefg\n é"[rng.index(10)]);
    const std::string train8 = utf8_encode(train);
    const std::size_t threshold = 1 + rng.index(60);
    const auto norm = normalize_rare_chars(train8, {}, threshold);
    std::set<char32_t> before(train.begin(), train.end()), after;
    for (char32_t c : utf8_decode(norm.train)) after.insert(c);
    EXPECT_LE(after.size(), before.size() + 1);
    EXPECT_EQ(std::count(norm.train.begin(), norm.train.end(), '\n'),
              std::count(train.begin(), train.end(), U'\n'));
  }
}

TEST(CharAlphabet, WriteReadRoundTrip) {
  const auto norm = normalize_rare_chars("aaab\n", {}, 2);
  std::stringstream ss;
  norm.alphabet.write(ss);
  const CharAlphabet back = CharAlphabet::read(ss);
  EXPECT_EQ(back.kept(), norm.alphabet.kept());
  EXPECT_EQ(back.threshold(), 2u);
  EXPECT_EQ(back.train_count(U'a'), 3u);
  EXPECT_EQ(back.normalize(std::string("abc")), "a◇◇");
}
