#include "mtnews/vocabulary.h"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "mtnews/common.h"

namespace mtnews {

Vocabulary::Vocabulary() {
  for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(s);
}

void Vocabulary::add(const std::string& token) {
  index_.emplace(token, static_cast<std::int32_t>(tokens_.size()));
  tokens_.push_back(token);
}

std::int32_t Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::int32_t> Vocabulary::ids(const std::string& text) const {
  std::vector<std::int32_t> out;
  for (const std::string& t : split_whitespace(text)) out.push_back(id(t));
  return out;
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << i << '\n';
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(expected + 1, "bad vocabulary line: " + line);
    const std::string token = line.substr(0, tab);
    const auto id = static_cast<std::size_t>(parse_int(line.substr(tab + 1)));
    if (id != expected) throw ParseError(expected + 1, "vocabulary ids must be consecutive");
    if (id < kNumSpecials) {
      if (v.tokens_[id] != token) throw ParseError(id + 1, "special token mismatch: " + token);
    } else {
      v.add(token);
    }
    ++expected;
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(0, "cannot write " + path.string());
  save(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return load(in);
}

Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t max_size) {
  if (max_size < Vocabulary::kNumSpecials + 1) {
    throw DomainError("build_vocab: max_size must be at least 6");
  }
  std::unordered_map<std::string, std::size_t> freq;
  for (const std::string& text : texts) {
    for (std::string& t : split_whitespace(text)) ++freq[t];
  }
  Vocabulary v;
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : freq) {
    if (v.index_.count(tok)) continue;
    ranked.emplace_back(tok, n);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocabulary::kNumSpecials);
  for (std::size_t i = 0; i < keep; ++i) v.add(ranked[i].first);
  return v;
}

}  // namespace mtnews
