#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ovlm/checkpoint.hpp"
#include "ovlm/random.hpp"
#include "ovlm_cli/cli.hpp"
#include "support/toy.hpp"

namespace fs = std::filesystem;
using namespace ovlm;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args, const std::string& stdin_text = "") {
  args.insert(args.begin(), "ovlm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const char* base = std::getenv("OVLM_TEST_TMP");
    dir_ = fs::path(base ? base : fs::temp_directory_path().string()) /
           ("cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Rng r(21);
    spit(dir_ / "train.txt", ovlm::testing::toy_corpus(r, 400, 30));
    spit(dir_ / "valid.txt", ovlm::testing::toy_corpus(r, 100, 30));
  }
  fs::path p(const std::string& name) const { return dir_ / name; }

  // Tiny model, one epoch.
  std::vector<std::string> train_args(const std::string& model, const std::string& out) const {
    return {"train", "--model", model, "--train", p("train.txt").string(),
            "--valid", p("valid.txt").string(), "--out", p(out).string(), "--quiet",
            "--epochs", "1", "--lm-embed-dim", "4", "--lm-hidden", "6", "--lm-layers", "1",
            "--speller-hidden", "5", "--speller-layers", "1", "--speller-char-emb-dim", "3",
            "--speller-batch", "8", "--streams", "4", "--seq-len-mean", "10",
            "--seq-len-alt-mean", "5", "--seq-len-cap", "12", "--vocab-size", "20",
            "--seed", "3"};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TokenizeDetokenizeRoundTrip) {
  const std::string text = "Some of 100,000 households (usually, a minority) ate breakfast.\n"
                           "héllo—wörld?!  tabs\there\n";
  const auto t = run({"tokenize"}, text);
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out, text);
  const auto d = run({"detokenize"}, t.out);
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(d.out, text);
}

TEST_F(Cli, FileInputAndOutput) {
  spit(p("in.txt"), "a-b c.\n");
  ASSERT_EQ(run({"tokenize", "-i", p("in.txt").string(), "-o", p("tok.txt").string()}).code, 0);
  ASSERT_EQ(run({"detokenize", "-i", p("tok.txt").string(), "-o", p("back.txt").string()}).code, 0);
  EXPECT_EQ(slurp(p("back.txt")), "a-b c.\n");
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"tokenize", "--no-such-flag"}).code, 2);
  const auto r = run({"train", "--model", "full"});  // --out missing
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--out"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, MissingFilesExitOne) {
  const auto r = run({"tokenize", "-i", p("absent.txt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.txt"), std::string::npos);
  EXPECT_EQ(run({"eval", "--model-prefix", p("nothing").string(), "--input",
                 p("valid.txt").string()}).code, 1);
  EXPECT_EQ(run({"perm-test", "--a", p("x").string(), "--b", p("y").string()}).code, 1);
}

TEST_F(Cli, BadModelFamilyFails) {
  auto args = train_args("trigram", "m");
  EXPECT_NE(run(args).code, 0);
}

TEST_F(Cli, BuildVocabAndBpe) {
  const auto v = run({"build-vocab", "--train", p("train.txt").string(), "--vocab-size", "10",
                      "--out", p("v").string()});
  ASSERT_EQ(v.code, 0) << v.err;
  std::istringstream vocab(slurp(p("v.vocab"))), types(slurp(p("v.types")));
  const Lexicon lex = Lexicon::read(vocab, &types);
  EXPECT_EQ(lex.num_words(), 10u);

  ASSERT_EQ(run({"learn-bpe", "--train", p("train.txt").string(), "--merges", "25", "--out",
                 p("m.bpe").string()}).code, 0);
  const std::string first = slurp(p("m.bpe"));
  ASSERT_EQ(run({"learn-bpe", "--train", p("train.txt").string(), "--merges", "25", "--out",
                 p("m.bpe").string()}).code, 0);
  EXPECT_EQ(slurp(p("m.bpe")), first);
  const auto seg = run({"apply-bpe", "--merges", p("m.bpe").string()}, "ba dubi\n");
  ASSERT_EQ(seg.code, 0) << seg.err;
  EXPECT_EQ(seg.out.back(), '\n');
}

TEST_F(Cli, TrainEvalSampleReproducible) {
  const auto a = run(train_args("full", "a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(train_args("full", "b"));
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(p("a.ckpt")), slurp(p("b.ckpt")));
  EXPECT_EQ(slurp(p("a.vocab")), slurp(p("b.vocab")));
  EXPECT_EQ(slurp(p("a.curve.tsv")), slurp(p("b.curve.tsv")));

  const std::vector<std::string> eval = {"eval", "--model-prefix", p("a").string(), "--input",
                                         p("valid.txt").string(), "--report",
                                         p("a.report").string()};
  const auto e1 = run(eval);
  ASSERT_EQ(e1.code, 0) << e1.err;
  EXPECT_EQ(run(eval).out, e1.out);
  EXPECT_NE(slurp(p("a.report")).find("article.0.bpc"), std::string::npos);
  // A checkpoint of a different family is rejected.
  auto wrong = eval;
  wrong.insert(wrong.end(), {"--model", "pure-char"});
  EXPECT_EQ(run(wrong).code, 1);

  const std::vector<std::string> sample = {"sample", "--model-prefix", p("a").string(),
                                           "--length", "30", "--seed", "5"};
  const auto s1 = run(sample);
  ASSERT_EQ(s1.code, 0) << s1.err;
  EXPECT_EQ(run(sample).out, s1.out);

  const auto perm = run({"perm-test", "--a", p("a.report").string(), "--b",
                         p("a.report").string(), "--trials", "100"});
  ASSERT_EQ(perm.code, 0) << perm.err;
  EXPECT_NE(perm.out.find("p = 1\n"), std::string::npos);
}

TEST_F(Cli, HybridVocabularyFlag) {
  auto args = train_args("full", "v");
  // Later occurrences override: the 50000 setting must reach the checkpoint.
  for (std::size_t i = 0; i + 1 < args.size(); ++i)
    if (args[i] == "--vocab-size") args[i + 1] = "50000";
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const Checkpoint ck = load_checkpoint(p("v.ckpt"));
  EXPECT_EQ(ck.meta("config.vocab-size"), "50000");
}

TEST_F(Cli, PureCharDefaults) {
  const auto r = run({"train", "--model", "pure-char", "--train", p("train.txt").string(),
                      "--valid", p("valid.txt").string(), "--out", p("c").string(), "--quiet",
                      "--epochs", "1", "--lm-hidden", "6", "--lm-layers", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Checkpoint ck = load_checkpoint(p("c.ckpt"));
  EXPECT_EQ(ck.meta("config.model"), "pure-char");
  EXPECT_EQ(std::stoul(ck.meta("config.streams")), 20u);
  EXPECT_DOUBLE_EQ(std::stod(ck.meta("config.seq-len-mean")), 100.0);
  EXPECT_DOUBLE_EQ(std::stod(ck.meta("config.lm-input-dropout")), 0.1);
  EXPECT_DOUBLE_EQ(std::stod(ck.meta("config.lm-hidden-dropout")), 0.1);
  EXPECT_DOUBLE_EQ(std::stod(ck.meta("config.lm-output-dropout")), 0.1);
  EXPECT_EQ(std::stoul(ck.meta("config.lm-embed-dim")), 10u);
  EXPECT_DOUBLE_EQ(std::stod(ck.meta("config.lr")), 5.0);
  // Units are the training characters plus separator and specials.
  std::istringstream vocab(slurp(p("c.vocab")));
  const Lexicon units = Lexicon::read(vocab);
  for (const auto& e : units.entries()) {
    if (Lexicon::is_special(units.lookup(e.spelling))) continue;
    EXPECT_LE(e.spelling.size(), 1u) << e.spelling;
  }
  const auto e = run({"eval", "--model-prefix", p("c").string(), "--input",
                      p("valid.txt").string()});
  EXPECT_EQ(e.code, 0) << e.err;
}

TEST_F(Cli, ConfigFileAndDataDirectory) {
  spit(p("cfg.txt"), "# tiny\nepochs = 1\nlm-embed-dim = 4\nlm-hidden = 5\nlm-layers = 1\n"
                     "speller-hidden = 4\nspeller-layers = 1\nvocab-size = 15\nstreams = 2\n"
                     "seq-len-mean = 8\nseq-len-cap = 10\n");
  setenv("OVLM_DATA_DIR", dir_.c_str(), 1);
  const auto r = run({"train", "--model", "1gram", "--config", p("cfg.txt").string(), "--out",
                      p("g").string(), "--quiet"});
  unsetenv("OVLM_DATA_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  const Checkpoint ck = load_checkpoint(p("g.ckpt"));
  EXPECT_EQ(ck.meta("config.model"), "1gram");
  EXPECT_EQ(ck.meta("config.vocab-size"), "15");
  spit(p("bad.txt"), "epochs 1\n");
  EXPECT_EQ(run({"train", "--config", p("bad.txt").string(), "--train", p("train.txt").string(),
                 "--out", p("h").string()}).code, 1);
}
