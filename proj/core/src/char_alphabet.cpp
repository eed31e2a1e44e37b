#include "ovlm/char_alphabet.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ovlm/unicode.hpp"

namespace ovlm {

namespace {

std::string hex_codepoint(char32_t c) {
  std::ostringstream s;
  s << "U+" << std::uppercase << std::hex << static_cast<std::uint32_t>(c);
  return s.str();
}

char32_t parse_codepoint(const std::string& s) {
  if (s.size() < 3 || s[0] != 'U' || s[1] != '+') {
    throw std::runtime_error("alphabet: bad code point '" + s + "'");
  }
  return static_cast<char32_t>(std::stoul(s.substr(2), nullptr, 16));
}

}  // namespace

CharAlphabet::CharAlphabet(std::map<char32_t, std::uint64_t> train_counts,
                           std::size_t threshold, char32_t replacement)
    : counts_(std::move(train_counts)), threshold_(threshold), replacement_(replacement) {
  if (threshold_ < 1) throw std::invalid_argument("alphabet: threshold must be >= 1");
  for (const auto& [c, n] : counts_) {
    if (c == replacement_) continue;
    if (n >= threshold_ || c == U'\n') kept_.insert(c);
  }
}

std::uint64_t CharAlphabet::train_count(char32_t c) const {
  auto it = counts_.find(c);
  return it == counts_.end() ? 0 : it->second;
}

std::u32string CharAlphabet::normalize(std::u32string_view text) const {
  std::u32string out(text);
  for (char32_t& c : out) {
    if (!contains(c)) c = replacement_;
  }
  return out;
}

std::string CharAlphabet::normalize(std::string_view utf8) const {
  return utf8_encode(normalize(std::u32string_view(utf8_decode(utf8))));
}

void CharAlphabet::write(std::ostream& out) const {
  out << "#alphabet\tthreshold=" << threshold_ << "\treplacement="
      << hex_codepoint(replacement_) << '\n';
  for (const auto& [c, n] : counts_) out << hex_codepoint(c) << '\t' << n << '\n';
}

CharAlphabet CharAlphabet::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#alphabet", 0) != 0) {
    throw std::runtime_error("alphabet: missing header line");
  }
  std::size_t threshold = kDefaultRareCharThreshold;
  char32_t replacement = kRareCharSymbol;
  std::istringstream header(line);
  std::string field;
  while (std::getline(header, field, '\t')) {
    if (field.rfind("threshold=", 0) == 0) threshold = std::stoul(field.substr(10));
    if (field.rfind("replacement=", 0) == 0) replacement = parse_codepoint(field.substr(12));
  }
  std::map<char32_t, std::uint64_t> counts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error("alphabet: malformed line");
    counts[parse_codepoint(line.substr(0, tab))] = std::stoull(line.substr(tab + 1));
  }
  return CharAlphabet(std::move(counts), threshold, replacement);
}

NormalizedCorpora normalize_rare_chars(std::string_view train,
                                       const std::vector<std::string>& others,
                                       std::size_t threshold) {
  const std::u32string train32 = utf8_decode(train);
  std::map<char32_t, std::uint64_t> counts;
  for (char32_t c : train32) ++counts[c];

  NormalizedCorpora result;
  result.alphabet = CharAlphabet(std::move(counts), threshold);
  result.train = utf8_encode(result.alphabet.normalize(std::u32string_view(train32)));
  for (const auto& o : others) result.others.push_back(result.alphabet.normalize(std::string_view(o)));
  return result;
}

}  // namespace ovlm
