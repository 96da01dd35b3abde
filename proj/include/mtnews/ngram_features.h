#ifndef MTNEWS_NGRAM_FEATURES_H_
#define MTNEWS_NGRAM_FEATURES_H_

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtnews {

// Sparse (index, weight) pairs with strictly increasing indices.
struct SparseVector {
  std::vector<std::pair<std::size_t, double>> entries;

  bool empty() const { return entries.empty(); }
  double norm() const;
  bool operator==(const SparseVector&) const = default;
};

double dot(const SparseVector& u, const SparseVector& v);

// Unigram + bigram vocabulary ranked by total corpus frequency, ties broken
// lexicographically. Bigrams are the two tokens joined by one space.
class NgramVocabulary {
 public:
  NgramVocabulary() = default;
  NgramVocabulary(std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
                  std::size_t num_docs);

  std::size_t size() const { return terms_.size(); }
  std::size_t num_docs() const { return num_docs_; }
  int max_ngram() const { return max_ngram_; }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::size_t>& doc_freq() const { return doc_freq_; }
  // Index of `term`, or -1.
  long index_of(const std::string& term) const;
  double idf(std::size_t index) const;

  void save(std::ostream& out) const;
  static NgramVocabulary load(std::istream& in);

 private:
  friend NgramVocabulary build_ngram_vocab(const std::vector<std::string>&, std::size_t, int);

  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::size_t num_docs_ = 0;
  int max_ngram_ = 2;
  std::unordered_map<std::string, std::size_t> index_;
};

// All n-grams of `text` for n in [1, max_ngram], in text order.
std::vector<std::string> extract_ngrams(const std::string& text, int max_ngram);

// `texts` are expected to be cleaned already. max_ngram is 1 or 2.
// Throws DomainError for an empty corpus.
NgramVocabulary build_ngram_vocab(const std::vector<std::string>& texts,
                                  std::size_t max_features = 25000, int max_ngram = 2);

// Raw term frequency times smoothed idf ln((1 + N) / (1 + df)) + 1, then L2
// normalized. Out-of-vocabulary n-grams are ignored.
SparseVector tfidf_transform(const std::string& text, const NgramVocabulary& vocab);

// 0 when either vector has zero norm.
double cosine_similarity(const SparseVector& u, const SparseVector& v);

}  // namespace mtnews

#endif  // MTNEWS_NGRAM_FEATURES_H_
