#include "ovlm_cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ovlm/bpe.hpp"
#include "ovlm/char_alphabet.hpp"
#include "ovlm/checkpoint.hpp"
#include "ovlm/evaluator.hpp"
#include "ovlm/generator.hpp"
#include "ovlm/lexicon.hpp"
#include "ovlm/models.hpp"
#include "ovlm/tokenizer.hpp"
#include "ovlm/train_config.hpp"
#include "ovlm/trainer.hpp"

namespace fs = std::filesystem;

namespace ovlm::cli {

namespace {

constexpr const char* kDataDirEnv = "OVLM_DATA_DIR";

class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot write " + path);
  return f;
}

void write_file(const std::string& path, const std::string& data) {
  auto f = open_out(path);
  f << data;
}

std::string read_input(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") {
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return read_file(path);
}

void write_output(const std::string& path, std::ostream& out, const std::string& data) {
  if (path.empty() || path == "-") {
    out << data;
    return;
  }
  write_file(path, data);
}

// Resolves a dataset file: explicit path, else <data dir>/<name>.
std::string data_path(const std::string& given, const std::string& name, bool required) {
  if (!given.empty()) return given;
  if (const char* dir = std::getenv(kDataDirEnv); dir != nullptr && *dir) {
    const fs::path p = fs::path(dir) / name;
    if (fs::exists(p) || required) return p.string();
  }
  if (required) {
    throw FileError("no path given for " + name + " and " + std::string(kDataDirEnv) +
                    " is not set");
  }
  return {};
}

std::optional<std::string> read_optional(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return read_file(path);
}

struct ModelFiles {
  std::string ckpt, vocab, types, merges, curve;
  explicit ModelFiles(const std::string& prefix)
      : ckpt(prefix + ".ckpt"),
        vocab(prefix + ".vocab"),
        types(prefix + ".types"),
        merges(prefix + ".merges"),
        curve(prefix + ".curve.tsv") {}
};

ModelBundle load_bundle(const std::string& prefix) {
  const ModelFiles files(prefix);
  const Checkpoint ckpt = [&] {
    if (!fs::exists(files.ckpt)) throw FileError("cannot open " + files.ckpt);
    return load_checkpoint(files.ckpt);
  }();
  std::istringstream vocab(read_file(files.vocab));
  std::istringstream types(read_file(files.types));
  Lexicon lex = Lexicon::read(vocab, &types);
  std::optional<MergeTable> merges;
  if (model_family_from_string(ckpt.meta("config.model")) == ModelFamily::kPureBpe) {
    std::istringstream m(read_file(files.merges));
    merges = MergeTable::read(m);
  }
  return ModelBundle::from_checkpoint(ckpt, std::move(lex), std::move(merges));
}

// Per-article values from a report file ("article.N.bpc = x") or a plain
// list of numbers.
std::vector<double> read_article_values(const std::string& path) {
  std::istringstream in(read_file(path));
  std::map<std::size_t, double> indexed;
  std::vector<double> plain;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("article.", 0) == 0) {
      const auto dot = line.find('.', 8);
      const auto eq = line.find('=');
      if (dot == std::string::npos || eq == std::string::npos) continue;
      indexed[std::stoul(line.substr(8, dot - 8))] = std::stod(line.substr(eq + 1));
    } else if (line.find('=') == std::string::npos) {
      plain.push_back(std::stod(line));
    }
  }
  if (!indexed.empty()) {
    plain.clear();
    for (const auto& [i, v] : indexed) plain.push_back(v);
  }
  return plain;
}

struct TrainArgs {
  std::string model = "full";
  std::string config_file;
  std::string train, valid, train_raw, valid_raw, out;
  std::map<std::string, std::string> overrides;
  bool quiet = false;
};

int do_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  std::map<std::string, std::string> kv;
  if (!a.config_file.empty()) {
    std::istringstream cf(read_file(a.config_file));
    kv = read_key_values(cf);
  }
  for (const auto& [k, v] : a.overrides) kv[k] = v;
  if (!a.model.empty()) kv["model"] = a.model;
  const TrainConfig cfg = TrainConfig::from_map(kv);
  const ModelFamily family = cfg.model;

  const std::string train_text = read_file(data_path(a.train, "train.txt", true));
  const std::string valid_path = data_path(a.valid, "valid.txt", false);
  const std::optional<std::string> valid_text = read_optional(valid_path);
  const std::optional<std::string> train_raw = read_optional(a.train_raw);
  const std::optional<std::string> valid_raw = read_optional(a.valid_raw);
  auto raw_view = [](const std::optional<std::string>& s) -> std::optional<std::string_view> {
    if (!s) return std::nullopt;
    return std::string_view(*s);
  };

  const TokenCounts tc = collect_tokens(train_text);
  const Lexicon words = Lexicon::build(tc.tokens, cfg.vocab_size, tc.lines);
  Rng rng(cfg.seed);

  Lexicon lexicon;
  std::optional<MergeTable> merges;
  EncodedCorpus train_corpus;
  std::optional<EncodedCorpus> dev_words;
  std::optional<SegmentedCorpus> dev_units;

  if (family == ModelFamily::kPureChar) {
    lexicon = build_char_vocab(train_text);
    train_corpus = segment_chars(train_text, lexicon, raw_view(train_raw)).units;
    if (valid_text) dev_units = segment_chars(*valid_text, lexicon, raw_view(valid_raw));
  } else if (family == ModelFamily::kPureBpe) {
    merges = learn_merges(train_text, cfg.bpe_merges).table;
    lexicon = build_unit_vocab(train_text, *merges);
    train_corpus = segment_corpus(train_text, *merges, lexicon, raw_view(train_raw)).units;
    if (valid_text) dev_units = segment_corpus(*valid_text, *merges, lexicon, raw_view(valid_raw));
  } else {
    lexicon = words;
    train_corpus = encode_corpus(train_text, lexicon, raw_view(train_raw));
    if (valid_text) dev_words = encode_corpus(*valid_text, lexicon, raw_view(valid_raw));
  }

  ModelBundle bundle = ModelBundle::create(cfg, lexicon, SpellAlphabet::from_text(train_text), rng);
  bundle.merges = merges;

  std::function<double()> dev_fn;
  if (dev_words) {
    dev_fn = [&] { return corpus_bpc(bundle, *dev_words).total_bpc; };
  } else if (dev_units) {
    dev_fn = [&] { return corpus_bpc(bundle, *dev_units, words.type_counts()).total_bpc; };
  }

  const ModelFiles files(a.out);
  auto curve = open_out(files.curve);
  curve << "epoch\ttrain_bpc\tdev_bpc\tprior_decay\ttype_spelling\ttoken_lm\tunk_spelling\n";
  curve << std::setprecision(10);
  TrainResult result = train(bundle, train_corpus, rng, dev_fn,
                             [&](const EpochReport& e, std::optional<double> dev) {
    curve << e.epoch << '\t' << e.train_bpc << '\t' << (dev ? *dev : -1.0) << '\t'
          << e.sums.prior_decay << '\t' << e.sums.type_spelling << '\t' << e.sums.token_lm
          << '\t' << e.sums.unk_spelling << '\n';
    if (!a.quiet) {
      err << "epoch " << e.epoch << "  train bpc " << e.train_bpc;
      if (dev) err << "  dev bpc " << *dev;
      err << '\n';
    }
  });

  const Checkpoint ckpt = result.best_epoch > 0 ? result.best : bundle.to_checkpoint();
  save_checkpoint(files.ckpt, ckpt);
  {
    auto v = open_out(files.vocab);
    lexicon.write_vocab(v);
    auto t = open_out(files.types);
    words.write_type_counts(t);
  }
  if (merges) {
    auto m = open_out(files.merges);
    merges->write(m);
  }
  out << "wrote " << files.ckpt << " (best epoch " << result.best_epoch << ")\n";
  return 0;
}

struct EvalArgs {
  std::string prefix, input, raw, report, label, model;
};

int do_eval(const EvalArgs& a, std::ostream& out) {
  ModelBundle bundle = load_bundle(a.prefix);
  if (!a.model.empty() && model_family_from_string(a.model) != bundle.config.model) {
    throw std::invalid_argument("checkpoint holds a " + std::string(to_string(bundle.config.model)) +
                                " model, not " + a.model);
  }
  const std::string text = read_file(data_path(a.input, "test.txt", true));
  const std::optional<std::string> raw = read_optional(a.raw);
  std::optional<std::string_view> raw_view;
  if (raw) raw_view = *raw;

  EvalReport report;
  switch (bundle.config.model) {
    case ModelFamily::kPureChar:
      report = corpus_bpc(bundle, segment_chars(text, bundle.lexicon, raw_view),
                          bundle.lexicon.type_counts());
      break;
    case ModelFamily::kPureBpe:
      report = corpus_bpc(bundle, segment_corpus(text, *bundle.merges, bundle.lexicon, raw_view),
                          bundle.lexicon.type_counts());
      break;
    default:
      report = corpus_bpc(bundle, encode_corpus(text, bundle.lexicon, raw_view));
  }
  write_report_table(out, report, a.label.empty() ? to_string(bundle.config.model) : a.label);
  if (!a.report.empty()) {
    auto f = open_out(a.report);
    write_report_kv(f, report);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Open-vocabulary language modeling toolkit", "ovlm"};
  app.require_subcommand(1);

  std::string input, output;
  auto* tokenize = app.add_subcommand("tokenize", "Reversibly tokenize UTF-8 text");
  tokenize->add_option("-i,--input", input, "Input file (default stdin)");
  tokenize->add_option("-o,--output", output, "Output file (default stdout)");
  auto* detokenize = app.add_subcommand("detokenize", "Invert tokenize");
  detokenize->add_option("-i,--input", input, "Input file (default stdin)");
  detokenize->add_option("-o,--output", output, "Output file (default stdout)");

  std::string norm_train, norm_dir;
  std::vector<std::string> norm_others;
  std::size_t threshold = kDefaultRareCharThreshold;
  auto* normalize = app.add_subcommand("normalize-chars", "Replace rare characters");
  normalize->add_option("--train", norm_train, "Training text")->required();
  normalize->add_option("--other", norm_others, "Further texts normalized the same way");
  normalize->add_option("--out-dir", norm_dir, "Output directory")->required();
  normalize->add_option("--threshold", threshold, "Minimum training count to keep a character");

  std::string vocab_train, vocab_out;
  std::size_t vocab_size = kDefaultVocabSize;
  auto* build_vocab = app.add_subcommand("build-vocab", "Build the lexeme vocabulary");
  build_vocab->add_option("--train", vocab_train, "Training text")->required();
  build_vocab->add_option("--vocab-size", vocab_size, "Number of word types kept");
  build_vocab->add_option("--out", vocab_out, "Output prefix (.vocab, .types)")->required();

  std::string bpe_train, bpe_out;
  std::size_t num_merges = kDefaultBpeMerges;
  auto* learn_bpe = app.add_subcommand("learn-bpe", "Learn BPE merges");
  learn_bpe->add_option("--train", bpe_train, "Training text")->required();
  learn_bpe->add_option("--merges", num_merges, "Number of merges");
  learn_bpe->add_option("--out", bpe_out, "Merges file")->required();

  std::string merges_file;
  auto* apply_bpe = app.add_subcommand("apply-bpe", "Segment text into BPE units");
  apply_bpe->add_option("--merges", merges_file, "Merges file")->required();
  apply_bpe->add_option("-i,--input", input, "Input file (default stdin)");
  apply_bpe->add_option("-o,--output", output, "Output file (default stdout)");

  TrainArgs targs;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--model", targs.model,
                        "full | no-reg | only-reg | sep-reg | 1gram | uncond | pure-char | pure-bpe");
  train_cmd->add_option("--config", targs.config_file, "key = value config file");
  train_cmd->add_option("--train", targs.train, "Training text (default $OVLM_DATA_DIR/train.txt)");
  train_cmd->add_option("--valid", targs.valid, "Dev text (default $OVLM_DATA_DIR/valid.txt)");
  train_cmd->add_option("--train-raw", targs.train_raw, "Untokenized training text");
  train_cmd->add_option("--valid-raw", targs.valid_raw, "Untokenized dev text");
  train_cmd->add_option("--out", targs.out, "Output prefix")->required();
  train_cmd->add_flag("--quiet", targs.quiet, "No per-epoch log");
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, value] : TrainConfig{}.to_map()) {
    if (key == "model") continue;
    train_cmd->add_option("--" + key, flag_values[key], "default " + value);
  }

  EvalArgs eargs;
  auto* eval_cmd = app.add_subcommand("eval", "Bits per character of a text");
  eval_cmd->add_option("--model-prefix", eargs.prefix, "Prefix given to train --out")->required();
  eval_cmd->add_option("--model", eargs.model, "Expected model family");
  eval_cmd->add_option("--input", eargs.input, "Tokenized text (default $OVLM_DATA_DIR/test.txt)");
  eval_cmd->add_option("--raw", eargs.raw, "Untokenized text for the character count");
  eval_cmd->add_option("--report", eargs.report, "Write a key = value report here");
  eval_cmd->add_option("--label", eargs.label, "Row label in the table");

  std::string perm_a, perm_b;
  std::size_t trials = 100000;
  std::uint64_t perm_seed = 1;
  auto* perm = app.add_subcommand("perm-test", "Paired permutation test on per-article bpc");
  perm->add_option("--a", perm_a, "Report or list for system A")->required();
  perm->add_option("--b", perm_b, "Report or list for system B")->required();
  perm->add_option("--trials", trials, "Monte-Carlo trials");
  perm->add_option("--seed", perm_seed, "Random seed");

  std::string sample_prefix;
  GenerateOptions gopts;
  bool plain = false;
  auto* sample = app.add_subcommand("sample", "Generate text");
  sample->add_option("--model-prefix", sample_prefix, "Prefix given to train --out")->required();
  sample->add_option("--length", gopts.length, "Tokens to generate");
  sample->add_option("--temperature", gopts.temperature, "Softmax temperature");
  sample->add_option("--seed", gopts.seed, "Random seed");
  sample->add_option("--max-spelling-length", gopts.max_spelling_length, "Longest novel spelling");
  sample->add_option("--open", gopts.novel_open, "Text before a novel word");
  sample->add_option("--close", gopts.novel_close, "Text after a novel word");
  sample->add_flag("--plain", plain, "Do not mark novel words");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "ovlm: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*tokenize || *detokenize) {
      const Tokenizer tok;
      const std::string text = read_input(input, in);
      write_output(output, out, *tokenize ? tok.tokenize(text) : tok.detokenize(text));
    } else if (*normalize) {
      std::vector<std::string> others;
      for (const auto& p : norm_others) others.push_back(read_file(p));
      const NormalizedCorpora nc = normalize_rare_chars(read_file(norm_train), others, threshold);
      fs::create_directories(norm_dir);
      write_file((fs::path(norm_dir) / fs::path(norm_train).filename()).string(), nc.train);
      for (std::size_t i = 0; i < others.size(); ++i) {
        write_file((fs::path(norm_dir) / fs::path(norm_others[i]).filename()).string(),
                   nc.others[i]);
      }
      auto f = open_out((fs::path(norm_dir) / "alphabet.tsv").string());
      nc.alphabet.write(f);
      out << "kept " << nc.alphabet.kept().size() << " characters\n";
    } else if (*build_vocab) {
      const TokenCounts tc = collect_tokens(read_file(vocab_train));
      const Lexicon lex = Lexicon::build(tc.tokens, vocab_size, tc.lines);
      auto v = open_out(vocab_out + ".vocab");
      lex.write_vocab(v);
      auto t = open_out(vocab_out + ".types");
      lex.write_type_counts(t);
      out << "vocabulary: " << lex.num_words() << " words of " << lex.distinct_train_types()
          << " training types\n";
      if (lex.size_request_exceeded()) {
        err << "note: requested size exceeds the number of training types\n";
      }
    } else if (*learn_bpe) {
      const LearnResult r = learn_merges(read_file(bpe_train), num_merges);
      auto f = open_out(bpe_out);
      r.table.write(f);
      out << "learned " << r.table.size() << " merges\n";
      if (r.exhausted) err << "note: fewer merges than requested were possible\n";
    } else if (*apply_bpe) {
      std::istringstream mf(read_file(merges_file));
      const MergeTable table = MergeTable::read(mf);
      const std::string text = read_input(input, in);
      std::string result;
      std::istringstream lines(text);
      std::string line;
      while (std::getline(lines, line)) {
        bool first = true;
        for (const auto& w : split_tokens(line)) {
          for (const auto& u : segment_word(w, table)) {
            if (!first) result.push_back(' ');
            result += u;
            first = false;
          }
        }
        result.push_back('\n');
      }
      write_output(output, out, result);
    } else if (*train_cmd) {
      for (const auto& [k, v] : flag_values) {
        if (!v.empty()) targs.overrides[k] = v;
      }
      if (train_cmd->count("--model") == 0) targs.model.clear();
      return do_train(targs, out, err);
    } else if (*eval_cmd) {
      return do_eval(eargs, out);
    } else if (*perm) {
      const auto a = read_article_values(perm_a);
      const auto b = read_article_values(perm_b);
      Rng rng(perm_seed);
      const double p = permutation_test(a, b, trials, rng);
      out << "articles = " << a.size() << "\np = " << std::setprecision(6) << p << '\n';
    } else if (*sample) {
      const ModelBundle bundle = load_bundle(sample_prefix);
      if (plain) gopts.novel_open = gopts.novel_close = "";
      out << generate(bundle, gopts).text;
      if (!out) return 1;
    }
  } catch (const FileError& e) {
    err << "ovlm: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "ovlm: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ovlm::cli
