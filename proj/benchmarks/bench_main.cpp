#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "ovlm/bpe.hpp"
#include "ovlm/lexeme_lm.hpp"
#include "ovlm/lstm.hpp"
#include "ovlm/ops.hpp"
#include "ovlm/speller.hpp"
#include "ovlm/tokenizer.hpp"

using namespace ovlm;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(r, c, v, grad);
}

std::string sample_text(std::size_t words) {
  Rng rng(1);
  static const char* pool[] = {"the", "households", "(usually,", "minority)", "ate",
                               "100,000", "breakfast.", "co-op", "naïve", "Zürich"};
  std::string s;
  for (std::size_t i = 0; i < words; ++i) {
    s += pool[rng.index(10)];
    s += (i % 12 == 11) ? '\n' : ' ';
  }
  return s;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_LstmStepForwardBackward(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const LstmLayer layer = LstmLayer::create(h, h, 0.1, rng);
  const Tensor x = random_matrix(20, h, rng);
  for (auto _ : state) {
    const LstmState s = lstm_step(layer, x, LstmState::zeros(20, h));
    ops::sum(s.h).backward();
  }
}
BENCHMARK(BM_LstmStepForwardBackward)->Arg(64)->Arg(256);

void BM_Tokenize(benchmark::State& state) {
  const Tokenizer tok;
  const std::string text = sample_text(10000);
  for (auto _ : state) benchmark::DoNotOptimize(tok.tokenize(text));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_LearnMerges(benchmark::State& state) {
  const std::string text = Tokenizer().tokenize(sample_text(20000));
  for (auto _ : state) benchmark::DoNotOptimize(learn_merges(text, 200));
}
BENCHMARK(BM_LearnMerges);

void BM_SpellerNll(benchmark::State& state) {
  SpellerConfig cfg;
  cfg.cond_dim = 16;
  cfg.hidden = 32;
  cfg.layers = 2;
  Rng rng(3);
  const Speller sp(cfg, SpellAlphabet::from_text("abcdefghijklmnopqrstuvwxyz"), rng);
  const std::vector<std::u32string> words(32, U"spelling");
  const Tensor conds = random_matrix(32, 16, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sp.nll(words, conds, true, rng).item());
}
BENCHMARK(BM_SpellerNll);

}  // namespace

BENCHMARK_MAIN();
