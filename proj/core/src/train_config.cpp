#include "ovlm/train_config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ovlm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("config: bad value '" + std::string(value) + "' for " +
                                std::string(key));
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(TrainConfig&, std::string_view, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, std::string_view k, std::string_view v) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename S, typename T>
Field nested_field(S TrainConfig::*outer, T S::*member) {
  return {[outer, member](TrainConfig& c, std::string_view k, std::string_view v) {
            c.*outer.*member = parse_number<T>(k, v);
          },
          [outer, member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(c.*outer.*member);
            else return std::to_string(c.*outer.*member);
          }};
}

const std::map<std::string, Field, std::less<>>& fields() {
  static const std::map<std::string, Field, std::less<>> table = {
      {"streams", number_field(&TrainConfig::streams)},
      {"seq-len-mean", number_field(&TrainConfig::seq_len_mean)},
      {"seq-len-sd", number_field(&TrainConfig::seq_len_sd)},
      {"seq-len-alt-mean", number_field(&TrainConfig::seq_len_alt_mean)},
      {"seq-len-alt-sd", number_field(&TrainConfig::seq_len_alt_sd)},
      {"seq-len-alt-prob", number_field(&TrainConfig::seq_len_alt_prob)},
      {"seq-len-cap", number_field(&TrainConfig::seq_len_cap)},
      {"lr", number_field(&TrainConfig::lr)},
      {"clip", number_field(&TrainConfig::clip)},
      {"speller-batch", number_field(&TrainConfig::speller_batch)},
      {"speller-period", number_field(&TrainConfig::speller_period)},
      {"speller-upweight", number_field(&TrainConfig::speller_upweight)},
      {"vocab-size", number_field(&TrainConfig::vocab_size)},
      {"bpe-merges", number_field(&TrainConfig::bpe_merges)},
      {"char-threshold", number_field(&TrainConfig::char_threshold)},
      {"epochs", number_field(&TrainConfig::epochs)},
      {"patience", number_field(&TrainConfig::patience)},
      {"seed", number_field(&TrainConfig::seed)},
      {"lm-embed-dim", nested_field(&TrainConfig::lm, &LmConfig::embed_dim)},
      {"lm-hidden", nested_field(&TrainConfig::lm, &LmConfig::hidden)},
      {"lm-layers", nested_field(&TrainConfig::lm, &LmConfig::layers)},
      {"lm-input-dropout", nested_field(&TrainConfig::lm, &LmConfig::input_dropout)},
      {"lm-hidden-dropout", nested_field(&TrainConfig::lm, &LmConfig::hidden_dropout)},
      {"lm-output-dropout", nested_field(&TrainConfig::lm, &LmConfig::output_dropout)},
      {"lm-weight-decay", nested_field(&TrainConfig::lm, &LmConfig::weight_decay)},
      {"lm-embed-decay", nested_field(&TrainConfig::lm, &LmConfig::embed_decay)},
      {"speller-char-emb-dim", nested_field(&TrainConfig::speller, &SpellerConfig::char_emb_dim)},
      {"speller-hidden", nested_field(&TrainConfig::speller, &SpellerConfig::hidden)},
      {"speller-layers", nested_field(&TrainConfig::speller, &SpellerConfig::layers)},
      {"speller-dropout", nested_field(&TrainConfig::speller, &SpellerConfig::dropout)},
      {"speller-cond-dropout", nested_field(&TrainConfig::speller, &SpellerConfig::cond_dropout)},
      {"nuclear-coef", nested_field(&TrainConfig::speller, &SpellerConfig::nuclear_coef)},
      {"speller-weight-decay", nested_field(&TrainConfig::speller, &SpellerConfig::weight_decay)},
  };
  return table;
}

}  // namespace

const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kFull: return "full";
    case ModelFamily::kNoReg: return "no-reg";
    case ModelFamily::kOnlyReg: return "only-reg";
    case ModelFamily::kSepReg: return "sep-reg";
    case ModelFamily::kUnigram: return "1gram";
    case ModelFamily::kUncond: return "uncond";
    case ModelFamily::kPureChar: return "pure-char";
    case ModelFamily::kPureBpe: return "pure-bpe";
  }
  return "full";
}

ModelFamily model_family_from_string(std::string_view s) {
  for (auto f : {ModelFamily::kFull, ModelFamily::kNoReg, ModelFamily::kOnlyReg,
                 ModelFamily::kSepReg, ModelFamily::kUnigram, ModelFamily::kUncond,
                 ModelFamily::kPureChar, ModelFamily::kPureBpe}) {
    if (s == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown model family: " + std::string(s));
}

bool is_hybrid(ModelFamily f) {
  return f != ModelFamily::kPureChar && f != ModelFamily::kPureBpe;
}

Ablation ablation_of(ModelFamily f) {
  switch (f) {
    case ModelFamily::kNoReg: return Ablation::kNoReg;
    case ModelFamily::kOnlyReg: return Ablation::kOnlyReg;
    case ModelFamily::kSepReg: return Ablation::kSepReg;
    default: return Ablation::kFull;
  }
}

SpellerVariant speller_variant_of(ModelFamily f) {
  if (f == ModelFamily::kUnigram) return SpellerVariant::kUnigram;
  if (f == ModelFamily::kUncond) return SpellerVariant::kUncond;
  return SpellerVariant::kFull;
}

TrainConfig TrainConfig::for_family(ModelFamily family) {
  TrainConfig c;
  c.model = family;
  c.speller.variant = speller_variant_of(family);
  if (family == ModelFamily::kPureChar) {
    c.streams = 20;
    c.seq_len_mean = 100.0;
    c.seq_len_alt_mean = 50.0;
    c.seq_len_cap = 120;
    c.lm.input_dropout = c.lm.hidden_dropout = c.lm.output_dropout = 0.1;
    c.lm.embed_dim = 10;
    c.lr = 5.0;
    c.epochs = 150;
  }
  return c;
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "model") {
    model = model_family_from_string(value);
    speller.variant = speller_variant_of(model);
    return;
  }
  auto it = fields().find(key);
  if (it == fields().end()) {
    throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
  }
  it->second.set(*this, key, value);
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  std::map<std::string, std::string> kv;
  kv["model"] = to_string(model);
  for (const auto& [k, f] : fields()) kv[k] = f.get(*this);
  return kv;
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  auto m = kv.find("model");
  TrainConfig c = for_family(m == kv.end() ? ModelFamily::kFull
                                           : model_family_from_string(m->second));
  for (const auto& [k, v] : kv) {
    if (k != "model") c.set(k, v);
  }
  return c;
}

std::map<std::string, std::string> read_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    kv[std::string(trim(s.substr(0, eq)))] = std::string(trim(s.substr(eq + 1)));
  }
  return kv;
}

void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ovlm
