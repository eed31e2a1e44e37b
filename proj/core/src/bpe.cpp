#include "ovlm/bpe.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "ovlm/unicode.hpp"

namespace ovlm {

namespace {

std::string pair_key(std::string_view l, std::string_view r) {
  std::string k;
  k.reserve(l.size() + r.size() + 1);
  k.append(l);
  k.push_back('\x1f');
  k.append(r);
  return k;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> syms;
  for (char32_t c : utf8_decode(word)) syms.push_back(utf8_encode(c));
  syms.emplace_back(kEndOfWord);
  return syms;
}

bool ends_with_marker(std::string_view s) {
  return s.size() >= kEndOfWord.size() && s.substr(s.size() - kEndOfWord.size()) == kEndOfWord;
}

// Symbol-id based learner state.
class Learner {
 public:
  explicit Learner(const std::unordered_map<std::string, std::uint64_t>& word_freq) {
    std::vector<std::pair<std::string, std::uint64_t>> words(word_freq.begin(), word_freq.end());
    std::sort(words.begin(), words.end());
    for (const auto& [w, f] : words) {
      Word word;
      word.freq = f;
      for (const auto& s : initial_symbols(w)) word.syms.push_back(intern(s));
      words_.push_back(std::move(word));
    }
    std::map<PairId, std::int64_t> initial;
    for (std::size_t wi = 0; wi < words_.size(); ++wi) {
      const auto& w = words_[wi];
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        const PairId p{w.syms[i], w.syms[i + 1]};
        initial[p] += static_cast<std::int64_t>(w.freq);
        where_[p].insert(wi);
      }
    }
    for (const auto& [p, n] : initial) set_count(p, n);
  }

  LearnResult run(std::size_t num_merges) {
    LearnResult result;
    std::vector<MergeTable::Pair> merges;
    while (merges.size() < num_merges) {
      if (queue_.empty() || std::get<0>(*queue_.begin()) <= 0) {
        result.exhausted = true;
        break;
      }
      const auto [neg_count, ls, rs] = *queue_.begin();
      const PairId best{sym_id_.at(ls), sym_id_.at(rs)};
      merges.emplace_back(ls, rs);
      apply(best, intern(ls + rs));
    }
    result.table = MergeTable(std::move(merges));
    return result;
  }

 private:
  using PairId = std::pair<int, int>;
  struct Word {
    std::vector<int> syms;
    std::uint64_t freq = 0;
  };
  // (count, left, right) ordered by count descending then pair ascending.
  struct QueueOrder {
    bool operator()(const std::tuple<std::int64_t, std::string, std::string>& a,
                    const std::tuple<std::int64_t, std::string, std::string>& b) const {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    }
  };

  int intern(const std::string& s) {
    auto [it, inserted] = sym_id_.emplace(s, static_cast<int>(syms_.size()));
    if (inserted) syms_.push_back(s);
    return it->second;
  }

  void set_count(const PairId& p, std::int64_t n) {
    auto it = counts_.find(p);
    if (it != counts_.end()) {
      queue_.erase({it->second, syms_[p.first], syms_[p.second]});
      if (n <= 0) {
        counts_.erase(it);
        return;
      }
      it->second = n;
    } else {
      if (n <= 0) return;
      counts_.emplace(p, n);
    }
    queue_.insert({n, syms_[p.first], syms_[p.second]});
  }

  void apply(const PairId& best, int merged) {
    std::map<PairId, std::int64_t> delta;
    const auto affected = where_[best];
    for (std::size_t wi : affected) {
      Word& w = words_[wi];
      const auto f = static_cast<std::int64_t>(w.freq);
      bool present = false;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        if (w.syms[i] == best.first && w.syms[i + 1] == best.second) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) delta[{w.syms[i], w.syms[i + 1]}] -= f;
      std::vector<int> out;
      out.reserve(w.syms.size());
      for (std::size_t i = 0; i < w.syms.size();) {
        if (i + 1 < w.syms.size() && w.syms[i] == best.first && w.syms[i + 1] == best.second) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(w.syms[i]);
          i += 1;
        }
      }
      w.syms = std::move(out);
      for (std::size_t i = 0; i + 1 < w.syms.size(); ++i) {
        const PairId p{w.syms[i], w.syms[i + 1]};
        delta[p] += f;
        where_[p].insert(wi);
      }
    }
    for (const auto& [p, d] : delta) {
      if (d == 0) continue;
      auto it = counts_.find(p);
      const std::int64_t old = it == counts_.end() ? 0 : it->second;
      set_count(p, old + d);
    }
    where_.erase(best);
  }

  std::vector<Word> words_;
  std::vector<std::string> syms_;
  std::unordered_map<std::string, int> sym_id_;
  std::map<PairId, std::int64_t> counts_;
  std::map<PairId, std::unordered_set<std::size_t>> where_;
  std::set<std::tuple<std::int64_t, std::string, std::string>, QueueOrder> queue_;
};

}  // namespace

MergeTable::MergeTable(std::vector<Pair> merges) : merges_(std::move(merges)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto& [l, r] = merges_[i];
    if (!ranks_.emplace(pair_key(l, r), static_cast<std::int64_t>(i)).second) {
      throw std::invalid_argument("merge table: duplicate pair '" + l + " " + r + "'");
    }
  }
}

std::int64_t MergeTable::rank(std::string_view left, std::string_view right) const {
  auto it = ranks_.find(pair_key(left, right));
  return it == ranks_.end() ? -1 : it->second;
}

void MergeTable::write(std::ostream& out) const {
  out << "#ovlm-bpe v1\n";
  for (const auto& [l, r] : merges_) out << l << ' ' << r << '\n';
}

MergeTable MergeTable::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#ovlm-bpe v1") {
    throw std::runtime_error("merges: missing or unsupported version header");
  }
  std::vector<Pair> merges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || line.find(' ', sp + 1) != std::string::npos) {
      throw std::runtime_error("merges: malformed line '" + line + "'");
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return MergeTable(std::move(merges));
}

LearnResult learn_merges(const std::unordered_map<std::string, std::uint64_t>& word_freq,
                         std::size_t num_merges) {
  if (num_merges == 0) return {};
  Learner learner(word_freq);
  return learner.run(num_merges);
}

LearnResult learn_merges(std::string_view corpus, std::size_t num_merges) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& t : collect_tokens(corpus).tokens) ++freq[t];
  return learn_merges(freq, num_merges);
}

std::vector<std::string> segment_word(std::string_view word, const MergeTable& table) {
  if (word.empty()) throw std::invalid_argument("segment_word: empty word");
  std::vector<std::string> syms = initial_symbols(word);
  while (syms.size() > 1) {
    std::int64_t best = -1;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      const auto r = table.rank(syms[i], syms[i + 1]);
      if (r >= 0 && (best < 0 || r < best)) best = r;
    }
    if (best < 0) break;
    const auto& [l, r] = table.merges()[best];
    std::vector<std::string> out;
    out.reserve(syms.size());
    for (std::size_t i = 0; i < syms.size();) {
      if (i + 1 < syms.size() && syms[i] == l && syms[i + 1] == r) {
        out.push_back(l + r);
        i += 2;
      } else {
        out.push_back(std::move(syms[i]));
        i += 1;
      }
    }
    syms = std::move(out);
  }
  if (syms.size() > 1 && syms.back() == kEndOfWord) {
    syms.pop_back();
    syms.back() += kEndOfWord;
  }
  return syms;
}

std::string join_units(const std::vector<std::string>& units) {
  std::string out;
  for (const auto& u : units) out += u;
  if (ends_with_marker(out)) out.resize(out.size() - kEndOfWord.size());
  return out;
}

Lexicon build_unit_vocab(std::string_view train_corpus, const MergeTable& table) {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::unordered_map<std::string, std::uint64_t> word_freq;
  for (const auto& t : collect_tokens(train_corpus).tokens) ++word_freq[t];
  for (const auto& [w, f] : word_freq) {
    for (char32_t c : utf8_decode(w)) {
      const std::string s = utf8_encode(c);
      counts.try_emplace(s, 0);
      counts.try_emplace(s + std::string(kEndOfWord), 0);
    }
    for (const auto& u : segment_word(w, table)) counts[u] += f;
  }
  for (const auto& [l, r] : table.merges()) {
    const std::string m = l + r;
    counts.try_emplace(m, 0);
    if (!ends_with_marker(m)) counts.try_emplace(m + std::string(kEndOfWord), 0);
  }
  counts.erase(std::string(kEndOfWord));
  return Lexicon::from_counts(counts, counts.size() == 0 ? 1 : counts.size());
}

SegmentedCorpus segment_corpus(std::string_view corpus, const MergeTable& table,
                               const Lexicon& unit_vocab, std::optional<std::string_view> raw) {
  SegmentedCorpus out;
  std::unordered_map<std::string, std::vector<std::string>> cache;
  const EncodedCorpus words = encode_corpus(corpus, Lexicon{}, raw);
  out.units.char_count_original = words.char_count_original;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t begin = out.units.ids.size();
    if (words.ids[i] == kEosId) {
      out.units.ids.push_back(kEosId);
      out.units.surface.emplace_back(kEosSurface);
    } else {
      const std::string& w = words.surface[i];
      auto it = cache.find(w);
      if (it == cache.end()) it = cache.emplace(w, segment_word(w, table)).first;
      for (const auto& u : it->second) {
        out.units.ids.push_back(unit_vocab.lookup(u));
        out.units.surface.push_back(u);
      }
    }
    out.token_spans.emplace_back(begin, out.units.ids.size());
    out.token_surface.push_back(words.surface[i]);
  }
  return out;
}

Lexicon build_char_vocab(std::string_view train_corpus) {
  std::unordered_map<std::string, std::uint64_t> counts;
  std::uint64_t lines = 0;
  const EncodedCorpus words = encode_corpus(train_corpus, Lexicon{}, std::nullopt);
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (words.ids[i] == kEosId) {
      ++lines;
      continue;
    }
    for (char32_t c : utf8_decode(words.surface[i])) ++counts[utf8_encode(c)];
    ++counts[std::string(kCharSeparator)];
  }
  return Lexicon::from_counts(counts, counts.size() + kNumSpecialLexemes, lines);
}

SegmentedCorpus segment_chars(std::string_view corpus, const Lexicon& char_vocab,
                              std::optional<std::string_view> raw) {
  SegmentedCorpus out;
  const EncodedCorpus words = encode_corpus(corpus, Lexicon{}, raw);
  out.units.char_count_original = words.char_count_original;
  const LexemeId sep = char_vocab.lookup(kCharSeparator);
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t begin = out.units.ids.size();
    if (words.ids[i] == kEosId) {
      out.units.ids.push_back(kEosId);
      out.units.surface.emplace_back(kEosSurface);
    } else {
      for (char32_t c : utf8_decode(words.surface[i])) {
        std::string u = utf8_encode(c);
        out.units.ids.push_back(char_vocab.lookup(u));
        out.units.surface.push_back(std::move(u));
      }
      out.units.ids.push_back(sep);
      out.units.surface.emplace_back(kCharSeparator);
    }
    out.token_spans.emplace_back(begin, out.units.ids.size());
    out.token_surface.push_back(words.surface[i]);
  }
  return out;
}

}  // namespace ovlm
