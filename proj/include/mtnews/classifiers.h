#ifndef MTNEWS_CLASSIFIERS_H_
#define MTNEWS_CLASSIFIERS_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtnews/corpus.h"
#include "mtnews/ngram_features.h"
#include "mtnews/tensor.h"

namespace mtnews {

// Index of the largest entry; the lowest index wins ties.
std::size_t argmax(const RowVector& scores);

// One-vs-rest linear model: margin_c(x) = w_c . x + b_c.
struct LinearClassifier {
  std::vector<std::string> labels;
  Matrix weights;  // classes x features
  RowVector bias;  // classes

  RowVector margins(const SparseVector& x) const;
  std::size_t predict(const SparseVector& x) const;

  void save(std::ostream& out) const;
  static LinearClassifier load(std::istream& in);
};

struct SvmConfig {
  int epochs = 100;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

// Hinge loss plus (l2 / 2) |w_c|^2 per class, minimized by full-batch
// subgradient descent from zero. `y` holds indices into `labels`;
// `num_features` fixes the weight width. Throws DomainError when fewer than
// two distinct classes are present.
LinearClassifier train_linear_svm(const std::vector<SparseVector>& x,
                                  const std::vector<std::size_t>& y,
                                  const std::vector<std::string>& labels,
                                  std::size_t num_features, const SvmConfig& config = {});

// Single hidden layer ReLU network with softmax output.
struct MlpClassifier {
  std::vector<std::string> labels;
  Matrix w1;     // features x hidden
  RowVector b1;  // hidden
  Matrix w2;     // hidden x classes
  RowVector b2;  // classes

  RowVector probabilities(const SparseVector& x) const;
  std::size_t predict(const SparseVector& x) const;

  void save(std::ostream& out) const;
  static MlpClassifier load(std::istream& in);
};

struct MlpConfig {
  std::size_t hidden = 64;
  int epochs = 100;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double clip_norm = 5.0;
  // Epochs without held-out improvement before stopping; 0 disables.
  int patience = 5;
  double validation_fraction = 0.1;
  // 0 means full batch.
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
};

struct MlpTrainResult {
  MlpClassifier model;
  std::vector<double> train_loss;       // full training loss after each epoch
  std::vector<double> validation_loss;  // empty without a held-out split
  std::size_t best_epoch = 0;
};

// Cross-entropy with gradient-norm clipping and early stopping on held-out
// loss; the returned model holds the best held-out parameters.
MlpTrainResult train_mlp(const std::vector<SparseVector>& x, const std::vector<std::size_t>& y,
                         const std::vector<std::string>& labels, std::size_t num_features,
                         const MlpConfig& config = {});

// Headline tf-idf, body tf-idf and their cosine, concatenated; width is
// 2 * |vocab| + 1.
RowVector rdel_features(const std::string& title, const std::string& body,
                        const NgramVocabulary& vocab);
// Same features in sparse form.
SparseVector rdel_sparse_features(const std::string& title, const std::string& body,
                                  const NgramVocabulary& vocab);

inline MlpTrainResult train_rdel(const std::vector<SparseVector>& features,
                                 const std::vector<std::size_t>& y,
                                 const std::vector<std::string>& labels,
                                 const NgramVocabulary& vocab, const MlpConfig& config = {}) {
  return train_mlp(features, y, labels, 2 * vocab.size() + 1, config);
}

// Score thresholds of the claim-scoring API: < 0.33 NFS, > 0.66 CFS, UFS in
// between (both ends inclusive). Throws DomainError outside [0, 1].
ClaimLabel map_claim_score(double score);

// tf-idf of the sentence, then ln(1 + token count), then `annotation_dim`
// annotation values (zero-filled when absent). Throws DomainError when a
// statement carries more than `annotation_dim` annotations.
SparseVector claim_features(const ClaimStatement& statement, const NgramVocabulary& vocab,
                            std::size_t annotation_dim);
inline std::size_t claim_feature_width(const NgramVocabulary& vocab, std::size_t annotation_dim) {
  return vocab.size() + 1 + annotation_dim;
}

}  // namespace mtnews

#endif  // MTNEWS_CLASSIFIERS_H_
