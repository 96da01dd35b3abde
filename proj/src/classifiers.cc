#include "mtnews/classifiers.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "mtnews/common.h"

namespace mtnews {
namespace {

void write_labels(std::ostream& out, const std::vector<std::string>& labels) {
  out << "labels";
  for (const auto& l : labels) out << '\t' << l;
  out << '\n';
}

std::vector<std::string> read_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("labels", 0) != 0) {
    throw ParseError(0, "expected labels line");
  }
  std::vector<std::string> labels;
  std::size_t pos = line.find('\t');
  while (pos != std::string::npos) {
    const std::size_t next = line.find('\t', pos + 1);
    labels.push_back(line.substr(pos + 1, next == std::string::npos ? next : next - pos - 1));
    pos = next;
  }
  return labels;
}

std::vector<std::string> read_header(std::istream& in, std::string_view kind) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty checkpoint");
  auto fields = split_whitespace(line);
  if (fields.empty() || fields[0] != kind) {
    throw ParseError(0, "expected a '" + std::string(kind) + "' checkpoint, got '" + line + "'");
  }
  return fields;
}

void check_training_input(std::size_t n_x, const std::vector<std::size_t>& y,
                          const std::vector<std::string>& labels, const char* who) {
  if (n_x == 0 || n_x != y.size()) {
    throw DomainError(std::string(who) + ": need as many labels as examples (> 0)");
  }
  std::set<std::size_t> classes;
  for (std::size_t c : y) {
    if (c >= labels.size()) throw DomainError(std::string(who) + ": label index out of range");
    classes.insert(c);
  }
  if (classes.size() < 2) throw DomainError(std::string(who) + ": need at least two classes");
}

RowVector softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  RowVector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

}  // namespace

std::size_t argmax(const RowVector& scores) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i) {
    if (scores(i) > scores(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

RowVector LinearClassifier::margins(const SparseVector& x) const {
  RowVector m = bias;
  for (const auto& [j, v] : x.entries) {
    if (static_cast<Eigen::Index>(j) < weights.cols()) {
      m += v * weights.col(static_cast<Eigen::Index>(j)).transpose();
    }
  }
  return m;
}

std::size_t LinearClassifier::predict(const SparseVector& x) const { return argmax(margins(x)); }

void LinearClassifier::save(std::ostream& out) const {
  out << "linear_svm " << weights.rows() << ' ' << weights.cols() << '\n';
  write_labels(out, labels);
  write_matrix_block(out, "weights", weights);
  write_matrix_block(out, "bias", bias);
}

LinearClassifier LinearClassifier::load(std::istream& in) {
  read_header(in, "linear_svm");
  LinearClassifier c;
  c.labels = read_labels(in);
  c.weights = read_matrix_block(in, "weights");
  c.bias = read_matrix_block(in, "bias");
  if (c.bias.size() != static_cast<Eigen::Index>(c.labels.size()) ||
      c.weights.rows() != c.bias.size()) {
    throw ParseError(0, "linear_svm checkpoint has inconsistent shapes");
  }
  return c;
}

LinearClassifier train_linear_svm(const std::vector<SparseVector>& x,
                                  const std::vector<std::size_t>& y,
                                  const std::vector<std::string>& labels,
                                  std::size_t num_features, const SvmConfig& config) {
  check_training_input(x.size(), y, labels, "train_linear_svm");
  const auto k = static_cast<Eigen::Index>(labels.size());
  const auto f = static_cast<Eigen::Index>(num_features);
  const double inv_n = 1.0 / static_cast<double>(x.size());

  LinearClassifier model;
  model.labels = labels;
  model.weights = Matrix::Zero(k, f);
  model.bias = RowVector::Zero(k);

  Matrix grad_w(k, f);
  RowVector grad_b(k);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    grad_w = config.l2 * model.weights;
    grad_b.setZero();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const RowVector m = model.margins(x[i]);
      for (Eigen::Index c = 0; c < k; ++c) {
        const double t = (static_cast<Eigen::Index>(y[i]) == c) ? 1.0 : -1.0;
        if (t * m(c) >= 1.0) continue;
        grad_b(c) -= t * inv_n;
        for (const auto& [j, v] : x[i].entries) {
          if (static_cast<Eigen::Index>(j) < f) grad_w(c, static_cast<Eigen::Index>(j)) -= t * v * inv_n;
        }
      }
    }
    model.weights -= config.learning_rate * grad_w;
    model.bias -= config.learning_rate * grad_b;
  }
  return model;
}

RowVector MlpClassifier::probabilities(const SparseVector& x) const {
  RowVector h = b1;
  for (const auto& [j, v] : x.entries) {
    if (static_cast<Eigen::Index>(j) < w1.rows()) h += v * w1.row(static_cast<Eigen::Index>(j));
  }
  h = h.cwiseMax(0.0);
  return softmax(h * w2 + b2);
}

std::size_t MlpClassifier::predict(const SparseVector& x) const { return argmax(probabilities(x)); }

void MlpClassifier::save(std::ostream& out) const {
  out << "mlp " << w1.rows() << ' ' << w1.cols() << ' ' << w2.cols() << '\n';
  write_labels(out, labels);
  write_matrix_block(out, "w1", w1);
  write_matrix_block(out, "b1", b1);
  write_matrix_block(out, "w2", w2);
  write_matrix_block(out, "b2", b2);
}

MlpClassifier MlpClassifier::load(std::istream& in) {
  read_header(in, "mlp");
  MlpClassifier m;
  m.labels = read_labels(in);
  m.w1 = read_matrix_block(in, "w1");
  m.b1 = read_matrix_block(in, "b1");
  m.w2 = read_matrix_block(in, "w2");
  m.b2 = read_matrix_block(in, "b2");
  if (m.w1.cols() != m.b1.size() || m.w2.rows() != m.w1.cols() || m.w2.cols() != m.b2.size() ||
      m.b2.size() != static_cast<Eigen::Index>(m.labels.size())) {
    throw ParseError(0, "mlp checkpoint has inconsistent shapes");
  }
  return m;
}

MlpTrainResult train_mlp(const std::vector<SparseVector>& x, const std::vector<std::size_t>& y,
                         const std::vector<std::string>& labels, std::size_t num_features,
                         const MlpConfig& config) {
  check_training_input(x.size(), y, labels, "train_mlp");
  if (config.hidden == 0) throw DomainError("train_mlp: hidden must be positive");
  const auto f = static_cast<Eigen::Index>(num_features);
  const auto h = static_cast<Eigen::Index>(config.hidden);
  const auto k = static_cast<Eigen::Index>(labels.size());
  Rng rng(config.seed);

  MlpClassifier model;
  model.labels = labels;
  model.w1 = Matrix(f, h);
  model.w2 = Matrix(h, k);
  const double s1 = std::sqrt(2.0 / static_cast<double>(std::max<Eigen::Index>(f, 1)));
  const double s2 = std::sqrt(2.0 / static_cast<double>(h + k));
  for (Eigen::Index i = 0; i < model.w1.size(); ++i) model.w1.data()[i] = rng.normal(0.0, s1);
  for (Eigen::Index i = 0; i < model.w2.size(); ++i) model.w2.data()[i] = rng.normal(0.0, s2);
  model.b1 = RowVector::Zero(h);
  model.b2 = RowVector::Zero(k);

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::size_t n_val = 0;
  if (config.validation_fraction > 0.0 && x.size() >= 2) {
    n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(x.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, x.size() - 1);
  }
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  auto mean_loss = [&](const std::vector<std::size_t>& idx) {
    double loss = 0.0;
    for (std::size_t i : idx) loss -= std::log(std::max(model.probabilities(x[i])(static_cast<Eigen::Index>(y[i])), 1e-300));
    return loss / static_cast<double>(idx.size());
  };

  Matrix vel_w1 = Matrix::Zero(f, h), vel_w2 = Matrix::Zero(h, k);
  RowVector vel_b1 = RowVector::Zero(h), vel_b2 = RowVector::Zero(k);
  Matrix g_w1(f, h), g_w2(h, k);
  RowVector g_b1(h), g_b2(k);

  MlpTrainResult result;
  MlpClassifier best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const std::size_t batch = config.batch_size == 0 ? train.size() : config.batch_size;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += batch) {
      const std::size_t end = std::min(train.size(), start + batch);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      g_w1.setZero();
      g_w2.setZero();
      g_b1.setZero();
      g_b2.setZero();
      for (std::size_t p = start; p < end; ++p) {
        const SparseVector& xi = x[train[p]];
        RowVector pre = model.b1;
        for (const auto& [j, v] : xi.entries) {
          if (static_cast<Eigen::Index>(j) < f) pre += v * model.w1.row(static_cast<Eigen::Index>(j));
        }
        const RowVector hidden = pre.cwiseMax(0.0);
        RowVector d_logits = softmax(hidden * model.w2 + model.b2);
        d_logits(static_cast<Eigen::Index>(y[train[p]])) -= 1.0;
        d_logits *= inv_b;
        g_w2.noalias() += hidden.transpose() * d_logits;
        g_b2 += d_logits;
        RowVector d_hidden = d_logits * model.w2.transpose();
        for (Eigen::Index u = 0; u < h; ++u) {
          if (pre(u) <= 0.0) d_hidden(u) = 0.0;
        }
        g_b1 += d_hidden;
        for (const auto& [j, v] : xi.entries) {
          if (static_cast<Eigen::Index>(j) < f) g_w1.row(static_cast<Eigen::Index>(j)) += v * d_hidden;
        }
      }
      const double norm = std::sqrt(g_w1.squaredNorm() + g_w2.squaredNorm() +
                                    g_b1.squaredNorm() + g_b2.squaredNorm());
      const double scale = (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;
      vel_w1 = config.momentum * vel_w1 + scale * g_w1;
      vel_w2 = config.momentum * vel_w2 + scale * g_w2;
      vel_b1 = config.momentum * vel_b1 + scale * g_b1;
      vel_b2 = config.momentum * vel_b2 + scale * g_b2;
      model.w1 -= config.learning_rate * vel_w1;
      model.w2 -= config.learning_rate * vel_w2;
      model.b1 -= config.learning_rate * vel_b1;
      model.b2 -= config.learning_rate * vel_b2;
    }
    result.train_loss.push_back(mean_loss(train));
    if (!std::isfinite(result.train_loss.back())) {
      throw TrainingError("train_mlp: non-finite loss at epoch " + std::to_string(epoch + 1));
    }
    if (val.empty()) {
      best = model;
      result.best_epoch = static_cast<std::size_t>(epoch);
      continue;
    }
    const double vl = mean_loss(val);
    result.validation_loss.push_back(vl);
    if (vl < best_val) {
      best_val = vl;
      best = model;
      result.best_epoch = static_cast<std::size_t>(epoch);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  if (config.epochs <= 0) best = model;
  result.model = std::move(best);
  return result;
}

RowVector rdel_features(const std::string& title, const std::string& body,
                        const NgramVocabulary& vocab) {
  const SparseVector s = rdel_sparse_features(title, body, vocab);
  RowVector dense = RowVector::Zero(static_cast<Eigen::Index>(2 * vocab.size() + 1));
  for (const auto& [j, v] : s.entries) dense(static_cast<Eigen::Index>(j)) = v;
  return dense;
}

SparseVector rdel_sparse_features(const std::string& title, const std::string& body,
                                  const NgramVocabulary& vocab) {
  const SparseVector t = tfidf_transform(title, vocab);
  const SparseVector b = tfidf_transform(body, vocab);
  SparseVector out;
  out.entries = t.entries;
  for (const auto& [j, v] : b.entries) out.entries.emplace_back(vocab.size() + j, v);
  const double cos = cosine_similarity(t, b);
  if (cos != 0.0) out.entries.emplace_back(2 * vocab.size(), cos);
  return out;
}

ClaimLabel map_claim_score(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw DomainError("map_claim_score: score must lie in [0, 1], got " + format_double(score));
  }
  if (score < 0.33) return ClaimLabel::kNFS;
  if (score > 0.66) return ClaimLabel::kCFS;
  return ClaimLabel::kUFS;
}

SparseVector claim_features(const ClaimStatement& statement, const NgramVocabulary& vocab,
                            std::size_t annotation_dim) {
  if (statement.annotations.size() > annotation_dim) {
    throw DomainError("claim_features: statement has " +
                      std::to_string(statement.annotations.size()) +
                      " annotations, expected at most " + std::to_string(annotation_dim));
  }
  SparseVector v = tfidf_transform(statement.text, vocab);
  const double len = static_cast<double>(token_count(statement.text));
  v.entries.emplace_back(vocab.size(), std::log1p(len));
  for (std::size_t i = 0; i < statement.annotations.size(); ++i) {
    if (statement.annotations[i] != 0.0) {
      v.entries.emplace_back(vocab.size() + 1 + i, statement.annotations[i]);
    }
  }
  return v;
}

}  // namespace mtnews
