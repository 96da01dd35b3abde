#ifndef MTNEWS_EVALUATION_H_
#define MTNEWS_EVALUATION_H_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtnews/corpus.h"

namespace mtnews {

// Rows are true labels, columns predicted labels.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t row_sum(std::size_t k) const;
  std::size_t col_sum(std::size_t k) const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws DomainError on a length mismatch or a label missing from `labels`.
ConfusionMatrix confusion_matrix(const std::vector<std::string>& truth,
                                 const std::vector<std::string>& pred,
                                 const std::vector<std::string>& labels);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 0/0 is taken as 0 for precision, recall and F1.
std::vector<ClassScores> per_class_scores(const ConfusionMatrix& cm);
std::vector<double> per_class_f1(const ConfusionMatrix& cm);

// Unweighted mean. Throws DomainError for an empty vector.
double macro_f1(std::span<const double> per_class);

struct DatedPrediction {
  Date published;
  std::string truth;
  std::string predicted;
};

// Macro F1 of each calendar month (index 0 = January); months without
// predictions are nullopt.
using MonthlySeries = std::array<std::optional<double>, 12>;
MonthlySeries monthly_macro_f1(const std::vector<DatedPrediction>& predictions,
                               const std::vector<std::string>& labels);
// `month,macro_f1`; missing months print NA.
std::string render_monthly_csv(const MonthlySeries& series);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-tailed
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);
// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

// Paired t-test on a - b. Throws DomainError when sizes differ, n < 2, or the
// differences have zero variance.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);
// Mean difference over the sample standard deviation of the differences.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct FoldSummary {
  std::vector<double> macro_f1;  // one per fold
  double mean = 0.0;
  double stddev = 0.0;  // sample (n - 1)
};

struct SignificanceBlock {
  std::string baseline;   // e.g. "BERT"
  std::string candidate;  // e.g. "MTBERT"
  TTestResult test;
  double effect_size = 0.0;  // Cohen's d of candidate - baseline
};

struct ExperimentReport {
  std::string feature;  // Title / Body / Merged
  std::string model;    // SVM / RDEL / BERT / MTBERT
  std::vector<std::string> display_labels;
  ConfusionMatrix confusion;       // summed over folds
  std::vector<double> per_class_f1;  // fractions; mean over folds
  double macro_f1 = 0.0;           // mean of per_class_f1
  std::optional<MonthlySeries> monthly;
  std::optional<FoldSummary> folds;
  std::optional<SignificanceBlock> significance;
};

// Single confusion matrix, or one per fold (per-class F1 averaged over folds).
ExperimentReport make_report(std::string feature, std::string model,
                             const std::vector<ConfusionMatrix>& folds,
                             std::vector<std::string> display_labels = {});

SignificanceBlock compare_folds(const std::string& baseline, std::span<const double> baseline_scores,
                                const std::string& candidate, std::span<const double> candidate_scores);

enum class ReportFormat { kCsv, kMarkdown };

// Deterministic text, percentages with two decimals. CSV: header plus one row
// per class and a macro row. Markdown: a results table (Feature, Model, one
// column per class, F1-Macro) followed by optional fold, significance and
// confusion sections.
std::string render_report(const ExperimentReport& report, ReportFormat format);

// One markdown table over several reports, rows in the given order; the
// feature cell is printed only when it changes.
std::string render_results_table(const std::vector<ExperimentReport>& reports);
std::string render_significance(const SignificanceBlock& block);
std::string render_confusion_csv(const ConfusionMatrix& cm);

}  // namespace mtnews

#endif  // MTNEWS_EVALUATION_H_
