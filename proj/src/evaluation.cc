#include "mtnews/evaluation.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mtnews/common.h"

namespace mtnews {
namespace {

std::string percent(double fraction) { return format_fixed(100.0 * fraction, 2); }

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::vector<std::string> labels_for_display(const ExperimentReport& r) {
  return r.display_labels.empty() ? r.confusion.labels : r.display_labels;
}

void require_paired(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) throw DomainError(std::string(who) + ": vectors differ in length");
  if (a.size() < 2) throw DomainError(std::string(who) + ": need at least two pairs");
}

// Mean and sample standard deviation of a - b.
std::pair<double, double> difference_moments(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dev = (a[i] - b[i]) - mean;
    ss += dev * dev;
  }
  return {mean, std::sqrt(ss / (n - 1.0))};
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts) s += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t k) const {
  return std::accumulate(counts[k].begin(), counts[k].end(), std::size_t{0});
}

std::size_t ConfusionMatrix::col_sum(std::size_t k) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row[k];
  return s;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (labels != other.labels) throw DomainError("confusion matrices have different labels");
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts[i].size(); ++j) counts[i][j] += other.counts[i][j];
  }
  return *this;
}

ConfusionMatrix confusion_matrix(const std::vector<std::string>& truth,
                                 const std::vector<std::string>& pred,
                                 const std::vector<std::string>& labels) {
  if (truth.size() != pred.size()) throw DomainError("confusion_matrix: length mismatch");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  ConfusionMatrix cm;
  cm.labels = labels;
  cm.counts.assign(labels.size(), std::vector<std::size_t>(labels.size(), 0));
  auto lookup = [&](const std::string& l) {
    auto it = index.find(l);
    if (it == index.end()) throw DomainError("confusion_matrix: unknown label '" + l + "'");
    return it->second;
  };
  for (std::size_t i = 0; i < truth.size(); ++i) ++cm.counts[lookup(truth[i])][lookup(pred[i])];
  return cm;
}

std::vector<ClassScores> per_class_scores(const ConfusionMatrix& cm) {
  std::vector<ClassScores> out(cm.labels.size());
  for (std::size_t k = 0; k < cm.labels.size(); ++k) {
    const auto tp = static_cast<double>(cm.counts[k][k]);
    ClassScores& s = out[k];
    s.precision = safe_ratio(tp, static_cast<double>(cm.col_sum(k)));
    s.recall = safe_ratio(tp, static_cast<double>(cm.row_sum(k)));
    s.f1 = safe_ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
  }
  return out;
}

std::vector<double> per_class_f1(const ConfusionMatrix& cm) {
  std::vector<double> out;
  for (const ClassScores& s : per_class_scores(cm)) out.push_back(s.f1);
  return out;
}

double macro_f1(std::span<const double> per_class) {
  if (per_class.empty()) throw DomainError("macro_f1: empty score vector");
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

MonthlySeries monthly_macro_f1(const std::vector<DatedPrediction>& predictions,
                               const std::vector<std::string>& labels) {
  std::array<std::vector<std::string>, 12> truth, pred;
  for (const DatedPrediction& p : predictions) {
    const auto m = static_cast<std::size_t>(p.published.month - 1);
    truth[m].push_back(p.truth);
    pred[m].push_back(p.predicted);
  }
  MonthlySeries series;
  for (std::size_t m = 0; m < 12; ++m) {
    if (truth[m].empty()) continue;
    series[m] = macro_f1(per_class_f1(confusion_matrix(truth[m], pred[m], labels)));
  }
  return series;
}

std::string render_monthly_csv(const MonthlySeries& series) {
  std::ostringstream out;
  out << "month,macro_f1\n";
  for (std::size_t m = 0; m < 12; ++m) {
    out << (m + 1) << ',' << (series[m] ? percent(*series[m]) : "NA") << '\n';
  }
  return out.str();
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("regularized_incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw DomainError("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b, "paired_t_test");
  const auto [mean, sd] = difference_moments(a, b);
  if (sd == 0.0) throw DomainError("paired_t_test: differences have zero variance");
  const auto n = static_cast<double>(a.size());
  TTestResult r;
  r.t = mean / (sd / std::sqrt(n));
  r.df = n - 1.0;
  r.p = regularized_incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
  return r;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b, "cohens_d");
  const auto [mean, sd] = difference_moments(a, b);
  if (sd == 0.0) throw DomainError("cohens_d: differences have zero variance");
  return mean / sd;
}

ExperimentReport make_report(std::string feature, std::string model,
                             const std::vector<ConfusionMatrix>& folds,
                             std::vector<std::string> display_labels) {
  if (folds.empty()) throw DomainError("make_report: no confusion matrices");
  ExperimentReport r;
  r.feature = std::move(feature);
  r.model = std::move(model);
  r.display_labels = std::move(display_labels);
  r.confusion = folds[0];
  r.per_class_f1.assign(folds[0].labels.size(), 0.0);
  std::vector<double> fold_macros;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f) r.confusion += folds[f];
    const auto f1 = per_class_f1(folds[f]);
    for (std::size_t k = 0; k < f1.size(); ++k) r.per_class_f1[k] += f1[k] / static_cast<double>(folds.size());
    fold_macros.push_back(macro_f1(f1));
  }
  r.macro_f1 = macro_f1(r.per_class_f1);
  if (folds.size() > 1) {
    FoldSummary s;
    s.macro_f1 = fold_macros;
    s.mean = std::accumulate(fold_macros.begin(), fold_macros.end(), 0.0) / static_cast<double>(fold_macros.size());
    double ss = 0.0;
    for (double m : fold_macros) ss += (m - s.mean) * (m - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(fold_macros.size() - 1));
    r.folds = std::move(s);
  }
  return r;
}

SignificanceBlock compare_folds(const std::string& baseline, std::span<const double> baseline_scores,
                                const std::string& candidate, std::span<const double> candidate_scores) {
  SignificanceBlock block;
  block.baseline = baseline;
  block.candidate = candidate;
  block.test = paired_t_test(candidate_scores, baseline_scores);
  block.effect_size = cohens_d(candidate_scores, baseline_scores);
  return block;
}

std::string render_significance(const SignificanceBlock& block) {
  std::ostringstream out;
  out << "paired t-test (" << block.candidate << " - " << block.baseline << "): t = "
      << format_fixed(block.test.t, 4) << ", df = " << format_fixed(block.test.df, 0)
      << ", p = " << format_fixed(block.test.p, 4) << ", Cohen's d = " << format_fixed(block.effect_size, 3)
      << '\n';
  return out.str();
}

std::string render_confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  out << "true\\pred";
  for (const auto& l : cm.labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    out << cm.labels[i];
    for (std::size_t c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

std::string render_results_table(const std::vector<ExperimentReport>& reports) {
  std::ostringstream out;
  if (reports.empty()) return {};
  const auto labels = labels_for_display(reports.front());
  out << "| Feature | Model |";
  for (const auto& l : labels) out << ' ' << l << " |";
  out << " F1-Macro |\n|---|---|";
  for (std::size_t i = 0; i < labels.size(); ++i) out << "---|";
  out << "---|\n";
  std::string last_feature;
  for (const ExperimentReport& r : reports) {
    out << "| " << (r.feature == last_feature ? "" : r.feature) << " | " << r.model << " |";
    last_feature = r.feature;
    for (double f1 : r.per_class_f1) out << ' ' << percent(f1) << " |";
    out << ' ' << percent(r.macro_f1);
    if (r.folds) out << " ± " << percent(r.folds->stddev);
    out << " |\n";
  }
  return out.str();
}

std::string render_report(const ExperimentReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    const auto scores = per_class_scores(report.confusion);
    const auto labels = labels_for_display(report);
    out << "label,precision,recall,f1,support\n";
    for (std::size_t k = 0; k < labels.size(); ++k) {
      out << labels[k] << ',' << percent(scores[k].precision) << ',' << percent(scores[k].recall)
          << ',' << percent(report.per_class_f1[k]) << ',' << report.confusion.row_sum(k) << '\n';
    }
    out << "macro,,," << percent(report.macro_f1) << ',' << report.confusion.total() << '\n';
    return out.str();
  }

  out << render_results_table({report});
  if (report.folds) {
    out << "\nFold macro F1:";
    for (double m : report.folds->macro_f1) out << ' ' << percent(m);
    out << " (mean " << percent(report.folds->mean) << " ± " << percent(report.folds->stddev) << ")\n";
  }
  if (report.monthly) {
    out << "\n| Month | F1-Macro |\n|---|---|\n";
    for (std::size_t m = 0; m < 12; ++m) {
      out << "| " << (m + 1) << " | " << ((*report.monthly)[m] ? percent(*(*report.monthly)[m]) : "NA") << " |\n";
    }
  }
  if (report.significance) out << '\n' << render_significance(*report.significance);
  const auto labels = labels_for_display(report);
  out << "\n| true \\ pred |";
  for (const auto& l : labels) out << ' ' << l << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < labels.size(); ++i) out << "---|";
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << "| " << labels[i] << " |";
    for (std::size_t c : report.confusion.counts[i]) out << ' ' << c << " |";
    out << '\n';
  }
  return out.str();
}

}  // namespace mtnews
