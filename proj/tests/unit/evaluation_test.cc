#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mtnews/common.h"
#include "mtnews/evaluation.h"
#include "../support/oracles.h"

namespace mtnews {
namespace {

using Labels = std::vector<std::string>;

TEST(ConfusionMatrixTest, DirectCounts) {
  const auto cm = confusion_matrix({"A", "A", "B"}, {"A", "B", "B"}, {"A", "B"});
  EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1}, {0, 1}}));
  EXPECT_EQ(cm.total(), 3u);
  EXPECT_EQ(cm.row_sum(0), 2u);
  EXPECT_EQ(cm.col_sum(1), 2u);
  const auto perfect = confusion_matrix({"A", "B", "C"}, {"A", "B", "C"}, {"A", "B", "C"});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(perfect.counts[i][j], i == j ? 1u : 0u);
  }
  EXPECT_THROW(confusion_matrix({"A"}, {"Z"}, {"A", "B"}), DomainError);
  EXPECT_THROW(confusion_matrix({"A", "B"}, {"A"}, {"A", "B"}), DomainError);
}

TEST(F1Test, HandComputedAndConventions) {
  ConfusionMatrix cm{{"A", "B"}, {{1, 1}, {0, 2}}};
  // A: P = 1, R = 1/2. B: P = 2/3, R = 1.
  const auto f1 = per_class_f1(cm);
  EXPECT_NEAR(f1[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(f1[1], 0.8, 1e-12);
  const auto scores = per_class_scores(cm);
  EXPECT_NEAR(scores[1].precision, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(scores[1].recall, 1.0);
  const auto diag = per_class_f1(confusion_matrix({"A", "B"}, {"A", "B"}, {"A", "B"}));
  EXPECT_EQ(diag, (std::vector<double>{1.0, 1.0}));
  const auto absent = per_class_f1(confusion_matrix({"A", "B"}, {"A", "B"}, {"A", "B", "C"}));
  EXPECT_EQ(absent[2], 0.0);
}

TEST(MacroF1Test, ReferenceRowsAverageToReferenceMacro) {
  const std::vector<double> single = {77.79, 60.87, 83.15, 85.66, 75.39, 43.98};
  const std::vector<double> multi = {67.95, 64.29, 86.09, 74.11, 76.60, 42.21};
  EXPECT_NEAR(macro_f1(single), 71.14, 0.005);
  EXPECT_NEAR(macro_f1(multi), 68.54, 0.005);
  EXPECT_EQ(macro_f1(std::vector<double>(4, 1.0)), 1.0);
  EXPECT_THROW(macro_f1(std::vector<double>{}), DomainError);
}

TEST(MacroF1Test, ConstantPredictorBound) {
  const Labels labels = {"a", "b", "c", "d"};
  Labels truth, pred;
  for (int i = 0; i < 40; ++i) {
    truth.push_back(labels[static_cast<std::size_t>(i % 4)]);
    pred.push_back("b");
  }
  EXPECT_LT(macro_f1(per_class_f1(confusion_matrix(truth, pred, labels))), 2.0 / 4.0);
  EXPECT_EQ(macro_f1(per_class_f1(confusion_matrix(truth, truth, labels))), 1.0);
}

TEST(MonthlyTest, SeriesAndAdditivity) {
  const Labels labels = {"x", "y"};
  std::vector<DatedPrediction> preds;
  Rng rng(3);
  for (int i = 0; i < 120; ++i) {
    int month = 1 + static_cast<int>(rng.uniform_int(12));
    if (month == 6) month = 7;
    preds.push_back({Date{2019, month, 1}, labels[rng.uniform_int(2)], labels[rng.uniform_int(2)]});
  }
  const auto series = monthly_macro_f1(preds, labels);
  EXPECT_FALSE(series[5].has_value());
  const auto csv = render_monthly_csv(series);
  EXPECT_EQ(csv.substr(0, 15), "month,macro_f1\n");
  EXPECT_NE(csv.find("\n6,NA\n"), std::string::npos);

  ConfusionMatrix summed = confusion_matrix({}, {}, labels);
  Labels all_truth, all_pred;
  for (int m = 1; m <= 12; ++m) {
    Labels t, p;
    for (const auto& d : preds) {
      if (d.published.month == m) {
        t.push_back(d.truth);
        p.push_back(d.predicted);
      }
    }
    summed += confusion_matrix(t, p, labels);
  }
  for (const auto& d : preds) {
    all_truth.push_back(d.truth);
    all_pred.push_back(d.predicted);
  }
  EXPECT_EQ(summed, confusion_matrix(all_truth, all_pred, labels));

  // Every label occurs in each non-empty month; an absent label would score
  // 0 under the 0/0 convention.
  std::vector<DatedPrediction> perfect;
  for (int m : {1, 2, 5, 11}) {
    for (const auto& l : labels) perfect.push_back({Date{2019, m, 3}, l, l});
  }
  const auto perfect_series = monthly_macro_f1(perfect, labels);
  for (int m = 1; m <= 12; ++m) {
    const auto& v = perfect_series[static_cast<std::size_t>(m - 1)];
    if (m == 1 || m == 2 || m == 5 || m == 11) {
      ASSERT_TRUE(v.has_value());
      EXPECT_EQ(*v, 1.0);
    } else {
      EXPECT_FALSE(v.has_value());
    }
  }
}

TEST(StatisticsTest, PairedFixture) {
  const std::vector<double> a = {44, 45, 46, 47, 48};
  const std::vector<double> b = {46, 47, 49, 48, 50};
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, -2.0 / (std::sqrt(0.5) / std::sqrt(5.0)), 1e-12);
  EXPECT_NEAR(r.t, -6.3246, 1e-3);
  EXPECT_EQ(r.df, 4.0);
  EXPECT_NEAR(r.p, 0.0032, 5e-4);
  EXPECT_NEAR(r.p, testing::t_two_tailed_p_by_quadrature(r.t, 4.0), 1e-9);
  EXPECT_NEAR(cohens_d(a, b), -2.8284, 1e-3);

  const auto swapped = paired_t_test(b, a);
  EXPECT_EQ(swapped.t, -r.t);
  EXPECT_EQ(swapped.p, r.p);

  EXPECT_THROW(paired_t_test(a, a), DomainError);
  EXPECT_THROW(cohens_d(a, a), DomainError);
  EXPECT_THROW(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}), DomainError);
  EXPECT_THROW(paired_t_test(a, std::vector<double>{1.0, 2.0}), DomainError);
}

TEST(StatisticsTest, ZeroMeanDifferencesGiveZeroEffect) {
  const std::vector<double> a = {1, 0, 1, 0};
  const std::vector<double> b = {0, 1, 0, 1};
  EXPECT_EQ(cohens_d(a, b), 0.0);
  EXPECT_NEAR(paired_t_test(a, b).p, 1.0, 1e-12);
}

TEST(StatisticsTest, SecondFixtureAgainstQuadrature) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {1.5, 1.0, 3.2, 5.0};
  const auto r = paired_t_test(a, b);
  EXPECT_NEAR(r.t, -0.41176, 1e-4);
  EXPECT_NEAR(r.p, 0.70816, 1e-4);
  EXPECT_NEAR(r.p, testing::t_two_tailed_p_by_quadrature(r.t, 3.0), 1e-9);
}

TEST(StatisticsTest, TEqualsDTimesRootN) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_int(20);
    std::vector<double> a(n), b(n);
    for (std::size_t j = 0; j < n; ++j) {
      a[j] = rng.normal(0.5, 1.0);
      b[j] = rng.normal(0.0, 1.0);
    }
    const double t = paired_t_test(a, b).t;
    const double d = cohens_d(a, b);
    EXPECT_NEAR(t, d * std::sqrt(static_cast<double>(n)), 1e-9 * std::max(1.0, std::abs(t)));
  }
}

TEST(StatisticsTest, PValueMonotoneInAbsT) {
  for (double df : {1.0, 2.0, 4.0, 9.0, 30.0}) {
    double previous = 1.0 + 1e-12;
    for (double t = 0.0; t <= 20.0; t += 0.05) {
      const double p = 2.0 * student_t_cdf(-t, df);
      EXPECT_LT(p, previous) << "df " << df << " t " << t;
      EXPECT_GT(p, 0.0);
      previous = p;
    }
  }
  EXPECT_NEAR(student_t_cdf(0.0, 5.0), 0.5, 1e-15);
  EXPECT_NEAR(regularized_incomplete_beta(2.0, 3.0, 0.4), 0.5248, 1e-12);
}

TEST(ReportTest, CsvRowsAndDeterminism) {
  const auto cm = confusion_matrix({"A", "A", "B"}, {"A", "B", "B"}, {"A", "B"});
  const auto report = make_report("Merged", "SVM", {cm});
  const auto csv = render_report(report, ReportFormat::kCsv);
  EXPECT_EQ(csv,
            "label,precision,recall,f1,support\n"
            "A,100.00,50.00,66.67,2\n"
            "B,50.00,100.00,66.67,1\n"
            "macro,,,66.67,3\n");
  EXPECT_EQ(render_report(report, ReportFormat::kCsv), csv);
  EXPECT_EQ(render_report(report, ReportFormat::kMarkdown), render_report(report, ReportFormat::kMarkdown));
}

TEST(ReportTest, MarkdownColumnsFollowResultsTableLayout) {
  const Labels labels = {"satire", "conspiracy", "propaganda", "neutral", "bias_left", "bias_right"};
  const Labels display = {"Satire", "Conspiracy", "Propaganda", "Neutral", "Bias-Left", "Bias-Right"};
  std::vector<ConfusionMatrix> folds;
  Rng rng(1);
  for (int f = 0; f < 5; ++f) {
    Labels t, p;
    for (int i = 0; i < 60; ++i) {
      t.push_back(labels[static_cast<std::size_t>(i % 6)]);
      p.push_back(rng.uniform() < 0.7 ? t.back() : labels[rng.uniform_int(6)]);
    }
    folds.push_back(confusion_matrix(t, p, labels));
  }
  auto report = make_report("Merged", "MTBERT", folds, display);
  ASSERT_TRUE(report.folds.has_value());
  EXPECT_EQ(report.folds->macro_f1.size(), 5u);
  EXPECT_EQ(report.confusion.total(), 300u);
  double mean = 0.0;
  for (double f : report.per_class_f1) mean += f / 6.0;
  EXPECT_NEAR(report.macro_f1, mean, 1e-15);

  const std::vector<double> base = {0.60, 0.62, 0.58, 0.61, 0.59};
  report.significance = compare_folds("BERT", base, "MTBERT", report.folds->macro_f1);
  EXPECT_EQ(report.significance->test.df, 4.0);

  const auto md = render_report(report, ReportFormat::kMarkdown);
  EXPECT_EQ(md.substr(0, md.find('\n')),
            "| Feature | Model | Satire | Conspiracy | Propaganda | Neutral | Bias-Left | Bias-Right | F1-Macro |");
  EXPECT_NE(md.find("paired t-test (MTBERT - BERT)"), std::string::npos);
  EXPECT_NE(md.find("| Merged | MTBERT |"), std::string::npos);
}

}  // namespace
}  // namespace mtnews
