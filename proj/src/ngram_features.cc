#include "mtnews/ngram_features.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_set>

#include "mtnews/common.h"

namespace mtnews {

double SparseVector::norm() const {
  double s = 0.0;
  for (const auto& [i, w] : entries) s += w * w;
  return std::sqrt(s);
}

double dot(const SparseVector& u, const SparseVector& v) {
  double s = 0.0;
  auto a = u.entries.begin();
  auto b = v.entries.begin();
  while (a != u.entries.end() && b != v.entries.end()) {
    if (a->first < b->first) {
      ++a;
    } else if (b->first < a->first) {
      ++b;
    } else {
      s += a->second * b->second;
      ++a;
      ++b;
    }
  }
  return s;
}

NgramVocabulary::NgramVocabulary(std::vector<std::string> terms,
                                 std::vector<std::size_t> doc_freq, std::size_t num_docs)
    : terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), num_docs_(num_docs) {
  max_ngram_ = 1;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    index_.emplace(terms_[i], i);
    if (terms_[i].find(' ') != std::string::npos) max_ngram_ = 2;
  }
}

long NgramVocabulary::index_of(const std::string& term) const {
  auto it = index_.find(term);
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

double NgramVocabulary::idf(std::size_t index) const {
  return std::log((1.0 + static_cast<double>(num_docs_)) /
                  (1.0 + static_cast<double>(doc_freq_[index]))) +
         1.0;
}

void NgramVocabulary::save(std::ostream& out) const {
  out << "ngram_vocab " << terms_.size() << ' ' << num_docs_ << ' ' << max_ngram_ << '\n';
  for (std::size_t i = 0; i < terms_.size(); ++i) out << terms_[i] << '\t' << doc_freq_[i] << '\n';
}

NgramVocabulary NgramVocabulary::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "missing ngram_vocab header");
  const auto header = split_whitespace(line);
  if (header.size() != 4 || header[0] != "ngram_vocab") {
    throw ParseError(0, "bad ngram_vocab header: " + line);
  }
  const auto count = static_cast<std::size_t>(parse_int(header[1]));
  const auto docs = static_cast<std::size_t>(parse_int(header[2]));
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError(0, "ngram_vocab truncated");
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(0, "bad ngram_vocab entry: " + line);
    terms.push_back(line.substr(0, tab));
    df.push_back(static_cast<std::size_t>(parse_int(line.substr(tab + 1))));
  }
  NgramVocabulary vocab(std::move(terms), std::move(df), docs);
  vocab.max_ngram_ = static_cast<int>(parse_int(header[3]));
  return vocab;
}

std::vector<std::string> extract_ngrams(const std::string& text, int max_ngram) {
  const auto tokens = split_whitespace(text);
  std::vector<std::string> grams;
  grams.reserve(tokens.size() * static_cast<std::size_t>(max_ngram));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    grams.push_back(tokens[i]);
    if (max_ngram >= 2 && i + 1 < tokens.size()) grams.push_back(tokens[i] + ' ' + tokens[i + 1]);
  }
  return grams;
}

NgramVocabulary build_ngram_vocab(const std::vector<std::string>& texts,
                                  std::size_t max_features, int max_ngram) {
  if (texts.empty()) throw DomainError("build_ngram_vocab: empty corpus");
  if (max_ngram < 1 || max_ngram > 2) throw DomainError("build_ngram_vocab: max_ngram must be 1 or 2");
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> counts;  // freq, df
  for (const std::string& text : texts) {
    std::unordered_set<std::string> seen;
    for (std::string& g : extract_ngrams(text, max_ngram)) {
      auto& c = counts[g];
      ++c.first;
      if (seen.insert(g).second) ++c.second;
    }
  }
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> ranked(
      counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  if (ranked.size() > max_features) ranked.resize(max_features);
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  for (auto& [term, c] : ranked) {
    terms.push_back(term);
    df.push_back(c.second);
  }
  NgramVocabulary vocab(std::move(terms), std::move(df), texts.size());
  vocab.max_ngram_ = max_ngram;
  return vocab;
}

SparseVector tfidf_transform(const std::string& text, const NgramVocabulary& vocab) {
  std::map<std::size_t, double> tf;
  for (const std::string& g : extract_ngrams(text, vocab.max_ngram())) {
    const long idx = vocab.index_of(g);
    if (idx >= 0) tf[static_cast<std::size_t>(idx)] += 1.0;
  }
  SparseVector v;
  v.entries.reserve(tf.size());
  double norm_sq = 0.0;
  for (const auto& [idx, count] : tf) {
    const double w = count * vocab.idf(idx);
    v.entries.emplace_back(idx, w);
    norm_sq += w * w;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& e : v.entries) e.second *= inv;
  }
  return v;
}

double cosine_similarity(const SparseVector& u, const SparseVector& v) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace mtnews
