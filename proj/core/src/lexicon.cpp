#include "ovlm/lexicon.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ovlm/unicode.hpp"

namespace ovlm {

Lexicon Lexicon::build(std::span<const std::string> tokens, std::size_t max_types,
                       std::uint64_t lines) {
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return from_counts(counts, max_types, lines);
}

Lexicon Lexicon::from_counts(const std::unordered_map<std::string, std::uint64_t>& counts,
                             std::size_t max_types, std::uint64_t lines) {
  if (max_types < 1) throw std::invalid_argument("lexicon: vocabulary size must be >= 1");
  std::vector<std::pair<std::string, std::uint64_t>> types(counts.begin(), counts.end());
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Lexicon lex;
  lex.type_counts_ = counts;
  lex.size_request_exceeded_ = max_types > types.size();
  const std::size_t kept = std::min(max_types, types.size());
  std::uint64_t unk_count = 0;
  for (std::size_t i = kept; i < types.size(); ++i) unk_count += types[i].second;

  lex.entries_.push_back({kUnkId, "", unk_count});
  lex.entries_.push_back({kEosId, "", lines});
  for (std::size_t i = 0; i < kept; ++i) {
    lex.entries_.push_back({static_cast<LexemeId>(i + kNumSpecialLexemes), types[i].first,
                            types[i].second});
  }
  lex.index();
  return lex;
}

void Lexicon::index() {
  by_spelling_.clear();
  for (const auto& e : entries_) {
    if (is_special(e.id)) continue;
    if (e.spelling.empty()) throw std::runtime_error("lexicon: empty spelling for a word");
    if (!by_spelling_.emplace(e.spelling, e.id).second) {
      throw std::runtime_error("lexicon: duplicate spelling '" + e.spelling + "'");
    }
  }
}

LexemeId Lexicon::lookup(std::string_view spelling) const {
  auto it = by_spelling_.find(std::string(spelling));
  return it == by_spelling_.end() ? kUnkId : it->second;
}

bool Lexicon::contains(std::string_view spelling) const {
  return by_spelling_.count(std::string(spelling)) > 0;
}

const std::string& Lexicon::spelling(LexemeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw std::out_of_range("lexicon: id out of range");
  }
  return entries_[id].spelling;
}

std::uint64_t Lexicon::count(LexemeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw std::out_of_range("lexicon: id out of range");
  }
  return entries_[id].count;
}

std::uint64_t Lexicon::type_count(std::string_view spelling) const {
  auto it = type_counts_.find(std::string(spelling));
  return it == type_counts_.end() ? 0 : it->second;
}

void Lexicon::write_vocab(std::ostream& out) const {
  for (const auto& e : entries_) out << e.id << '\t' << e.spelling << '\t' << e.count << '\n';
}

void Lexicon::write_type_counts(std::ostream& out) const {
  std::vector<std::pair<std::string, std::uint64_t>> types(type_counts_.begin(),
                                                           type_counts_.end());
  std::sort(types.begin(), types.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [s, n] : types) out << s << '\t' << n << '\n';
}

Lexicon Lexicon::read(std::istream& vocab, std::istream* type_counts) {
  Lexicon lex;
  std::string line;
  while (std::getline(vocab, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw std::runtime_error("vocab: malformed line '" + line + "'");
    LexiconEntry e;
    e.id = std::stoll(line.substr(0, t1));
    e.spelling = line.substr(t1 + 1, t2 - t1 - 1);
    e.count = std::stoull(line.substr(t2 + 1));
    if (e.id != static_cast<LexemeId>(lex.entries_.size())) {
      throw std::runtime_error("vocab: ids must be dense and ordered");
    }
    lex.entries_.push_back(std::move(e));
  }
  if (lex.entries_.size() < kNumSpecialLexemes) throw std::runtime_error("vocab: missing specials");
  lex.index();
  if (type_counts != nullptr) {
    while (std::getline(*type_counts, line)) {
      if (line.empty()) continue;
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw std::runtime_error("type counts: malformed line");
      lex.type_counts_[line.substr(0, tab)] = std::stoull(line.substr(tab + 1));
    }
  } else {
    for (const auto& e : lex.entries_) {
      if (!is_special(e.id)) lex.type_counts_[e.spelling] = e.count;
    }
  }
  return lex;
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  const std::u32string text = utf8_decode(line);
  std::u32string current;
  for (char32_t c : text) {
    if (is_space(c)) {
      if (!current.empty()) out.push_back(utf8_encode(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(utf8_encode(current));
  return out;
}

namespace {

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      fn(text.substr(start), false);
      return;
    }
    fn(text.substr(start, nl - start), true);
    start = nl + 1;
  }
}

}  // namespace

TokenCounts collect_tokens(std::string_view text) {
  TokenCounts result;
  for_each_line(text, [&](std::string_view line, bool terminated) {
    for (auto& t : split_tokens(line)) result.tokens.push_back(std::move(t));
    if (terminated) ++result.lines;
  });
  return result;
}

EncodedCorpus encode_corpus(std::string_view tokenized, const Lexicon& lexicon,
                            std::optional<std::string_view> raw) {
  EncodedCorpus corpus;
  for_each_line(tokenized, [&](std::string_view line, bool terminated) {
    for (auto& t : split_tokens(line)) {
      corpus.ids.push_back(lexicon.lookup(t));
      corpus.surface.push_back(std::move(t));
    }
    if (terminated) {
      corpus.ids.push_back(kEosId);
      corpus.surface.emplace_back(kEosSurface);
    }
  });
  corpus.char_count_original = utf8_length(raw ? *raw : tokenized);
  return corpus;
}

std::string decode_corpus(const EncodedCorpus& corpus, const Lexicon& lexicon) {
  std::string out;
  bool line_start = true;
  for (std::size_t i = 0; i < corpus.ids.size(); ++i) {
    const LexemeId id = corpus.ids[i];
    if (id == kEosId) {
      out.push_back('\n');
      line_start = true;
      continue;
    }
    if (!line_start) out.push_back(' ');
    out += id == kUnkId ? corpus.surface[i] : lexicon.spelling(id);
    line_start = false;
  }
  return out;
}

FrequencyBin frequency_bin_for(std::uint64_t train_count) {
  if (train_count == 0) return FrequencyBin::kUnseen;
  if (train_count < kFrequentThreshold) return FrequencyBin::kRare;
  return FrequencyBin::kFrequent;
}

std::size_t BinnedPositions::total() const {
  std::size_t n = 0;
  for (const auto& p : positions) n += p.size();
  return n;
}

BinnedPositions frequency_bin(const Lexicon& lexicon, const EncodedCorpus& corpus) {
  BinnedPositions bins;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus.ids[i] == kEosId) continue;
    const auto bin = frequency_bin_for(lexicon.type_count(corpus.surface[i]));
    bins.positions[static_cast<std::size_t>(bin)].push_back(i);
  }
  return bins;
}

namespace {

std::vector<NgramRank> rank(const std::map<std::string, std::uint64_t>& counts) {
  std::vector<NgramRank> out;
  out.reserve(counts.size());
  for (const auto& [g, n] : counts) out.push_back({g, n, 0});
  std::stable_sort(out.begin(), out.end(),
                   [](const NgramRank& a, const NgramRank& b) { return a.count > b.count; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

std::optional<NgramRank> find_rank(const std::vector<NgramRank>& ranks, std::string_view g) {
  for (const auto& r : ranks) {
    if (r.ngram == g) return r;
  }
  return std::nullopt;
}

}  // namespace

std::optional<NgramRank> NgramRankReport::token_rank(std::string_view ngram) const {
  return find_rank(by_token, ngram);
}

std::optional<NgramRank> NgramRankReport::type_rank(std::string_view ngram) const {
  return find_rank(by_type, ngram);
}

NgramRankReport ngram_rank_report(std::string_view corpus, std::size_t n, bool pad_words) {
  if (n < 1) throw std::invalid_argument("ngram_rank_report: n must be >= 1");
  const auto tokens = collect_tokens(corpus).tokens;
  std::unordered_map<std::string, std::uint64_t> word_freq;
  for (const auto& t : tokens) ++word_freq[t];

  std::map<std::string, std::uint64_t> by_token, by_type;
  for (const auto& [word, freq] : word_freq) {
    std::u32string w = utf8_decode(word);
    if (pad_words) w = U" " + w + U" ";
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
      const std::string g = utf8_encode(std::u32string_view(w).substr(i, n));
      by_token[g] += freq;
      by_type[g] += 1;
    }
  }
  return {rank(by_token), rank(by_type)};
}

}  // namespace ovlm
