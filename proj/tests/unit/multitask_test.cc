#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <utility>
#include <sstream>

#include "mtnews/common.h"
#include "mtnews/grad_check.h"
#include "mtnews/multitask.h"
#include "mtnews/synthetic.h"

namespace mtnews {
namespace {

struct Fixture {
  std::vector<NewsArticle> news;
  std::vector<CSQAItem> questions;
  std::vector<ClaimStatement> claims;
  ModelBundle bundle;
  TaskSpec news_spec = news_task("news", "title");
  TaskSpec csqa_spec = csqa_task("csqa");
  TaskSpec claim_spec = claim_task("claims");
};

Fixture make_fixture(double init_std = 0.1) {
  Fixture f;
  SyntheticNewsOptions opts;
  opts.articles = 60;
  opts.seed = 1;
  f.news = synthetic_news(opts);
  f.questions = synthetic_csqa(20, 5, 2);
  f.claims = synthetic_claims(30, 30, 3);
  std::vector<std::string> texts;
  for (const auto& a : f.news) texts.push_back(a.title);
  for (const auto& q : f.questions) {
    texts.push_back(q.question);
    for (const auto& c : q.choices) texts.push_back(c);
  }
  for (const auto& c : f.claims) texts.push_back(c.text);
  Vocabulary vocab = build_vocab(texts, 200);
  EncoderConfig config;
  config.max_positions = 40;
  config.vocab_size = vocab.size();
  config.init_std = init_std;
  f.bundle = make_bundle(config, vocab, 5);
  f.news_spec.recipe.max_a = 16;
  f.csqa_spec.recipe.max_a = 12;
  f.csqa_spec.recipe.max_b = 6;
  f.claim_spec.recipe.max_a = 16;
  register_task(f.bundle, f.news_spec, 10);
  register_task(f.bundle, f.csqa_spec, 11);
  register_task(f.bundle, f.claim_spec, 12);
  return f;
}

std::vector<Matrix> snapshot(const std::vector<const Tensor*>& tensors) {
  std::vector<Matrix> out;
  for (const Tensor* t : tensors) out.push_back(t->value);
  return out;
}

TEST(RegisterTaskTest, HeadShapesAndErrors) {
  auto f = make_fixture();
  EXPECT_EQ(f.bundle.head("news").weight.value.cols(), 6);
  EXPECT_EQ(f.bundle.head("news").weight.value.rows(), 32);
  EXPECT_EQ(f.bundle.head("csqa").weight.value.cols(), 1);
  EXPECT_EQ(f.bundle.head("claims").bias.value.cols(), 3);
  EXPECT_THROW(register_task(f.bundle, f.news_spec, 1), DomainError);
  EXPECT_THROW(f.bundle.head("missing"), DomainError);

  TaskSpec empty_labels = f.news_spec;
  empty_labels.name = "empty";
  empty_labels.labels.clear();
  EXPECT_THROW(register_task(f.bundle, empty_labels, 1), DomainError);

  // The default merged recipe needs 1 + 128 + 1 + 512 + 1 positions.
  EXPECT_THROW(register_task(f.bundle, news_task("merged", "merged"), 1), DomainError);
}

TEST(RegisterTaskTest, SharedParametersUntouched) {
  auto f = make_fixture();
  const auto before = snapshot(std::as_const(f.bundle.encoder).tensors());
  auto spec = f.news_spec;
  spec.name = "news2";
  register_task(f.bundle, spec, 99);
  EXPECT_EQ(snapshot(std::as_const(f.bundle.encoder).tensors()), before);
}

TEST(ScheduleTest, PermutationContract) {
  const auto schedule = build_schedule({{"a", 3}, {"b", 2}}, 4);
  ASSERT_EQ(schedule.size(), 5u);
  std::multiset<std::pair<std::string, std::size_t>> seen;
  for (const auto& s : schedule) seen.insert({s.task, s.batch_index});
  const std::multiset<std::pair<std::string, std::size_t>> expected = {
      {"a", 0}, {"a", 1}, {"a", 2}, {"b", 0}, {"b", 1}};
  EXPECT_EQ(seen, expected);
  EXPECT_EQ(build_schedule({{"a", 3}, {"b", 2}}, 4), schedule);
  try {
    build_schedule({{"a", 3}, {"quiet", 0}}, 1);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("quiet"), std::string::npos);
  }
}

TEST(ScheduleTest, FirstSlotFrequencyProportionalToBatches) {
  std::map<std::string, int> first;
  const int trials = 1000;
  for (int seed = 0; seed < trials; ++seed) {
    ++first[build_schedule({{"a", 6}, {"b", 3}, {"c", 1}}, static_cast<std::uint64_t>(seed)).front().task];
  }
  EXPECT_NEAR(first["a"] / double(trials), 0.6, 0.05);
  EXPECT_NEAR(first["b"] / double(trials), 0.3, 0.05);
  EXPECT_NEAR(first["c"] / double(trials), 0.1, 0.05);
}

TEST(TrainStepTest, UniformHeadGivesLogK) {
  auto f = make_fixture();
  std::vector<TaskExample> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(encode_example(f.news_spec, f.news[static_cast<std::size_t>(i)], f.bundle.vocab));
  // Freshly initialized head: close to uniform.
  {
    auto copy = f.bundle;
    MultiTaskTrainer trainer(copy, {});
    EXPECT_NEAR(trainer.train_step("news", batch), std::log(6.0), 0.1);
  }
  auto& head = f.bundle.head("news");
  head.weight.value.setZero();
  head.bias.value.setZero();
  MultiTaskTrainer trainer(f.bundle, {});
  EXPECT_NEAR(trainer.train_step("news", batch), std::log(6.0), 1e-2);
}

TEST(TrainStepTest, ZeroHeadPredictsUniform) {
  auto f = make_fixture();
  auto& head = f.bundle.head("news");
  head.weight.value.setZero();
  head.bias.value.setZero();
  const auto p = predict_class(f.bundle, "news", TaskRecord{f.news[3]});
  for (Eigen::Index k = 0; k < 6; ++k) EXPECT_NEAR(p.probabilities[k], 1.0 / 6.0, 1e-12);
  EXPECT_EQ(p.label, 0u);
  EXPECT_THROW(predict_class(f.bundle, "nope", TaskRecord{f.news[3]}), DomainError);
}

TEST(TrainStepTest, OnlyActiveHeadAndEncoderChange) {
  auto f = make_fixture();
  const auto encoder_before = snapshot(std::as_const(f.bundle.encoder).tensors());
  const Matrix news_w = f.bundle.head("news").weight.value;
  const Matrix news_b = f.bundle.head("news").bias.value;
  const Matrix claim_w = f.bundle.head("claims").weight.value;
  const Matrix claim_b = f.bundle.head("claims").bias.value;
  const Matrix csqa_w = f.bundle.head("csqa").weight.value;

  std::vector<TaskExample> batch = {encode_example(f.csqa_spec, f.questions[0], f.bundle.vocab),
                                    encode_example(f.csqa_spec, f.questions[1], f.bundle.vocab)};
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  MultiTaskTrainer trainer(f.bundle, cfg);
  trainer.train_step("csqa", batch);

  EXPECT_EQ(f.bundle.head("news").weight.value, news_w);
  EXPECT_EQ(f.bundle.head("news").bias.value, news_b);
  EXPECT_EQ(f.bundle.head("claims").weight.value, claim_w);
  EXPECT_EQ(f.bundle.head("claims").bias.value, claim_b);
  EXPECT_NE(f.bundle.head("csqa").weight.value, csqa_w);
  EXPECT_NE(snapshot(std::as_const(f.bundle.encoder).tensors()), encoder_before);
}

TEST(TrainStepTest, OverfitsOneBatch) {
  auto f = make_fixture();
  std::vector<TaskExample> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(encode_example(f.news_spec, f.news[static_cast<std::size_t>(i)], f.bundle.vocab));
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  MultiTaskTrainer trainer(f.bundle, cfg);
  double loss = 0.0;
  int steps = 0;
  for (; steps < 300; ++steps) {
    loss = trainer.train_step("news", batch);
    if (loss < 0.05) break;
  }
  EXPECT_LT(loss, 0.05) << "after " << steps << " steps";
}

TEST(TrainStepTest, DivergenceRaisesTrainingError) {
  auto f = make_fixture();
  f.bundle.head("news").weight.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<TaskExample> batch = {encode_example(f.news_spec, f.news[0], f.bundle.vocab)};
  MultiTaskTrainer trainer(f.bundle, {});
  EXPECT_THROW(trainer.train_step("news", batch), TrainingError);
}

std::vector<TaskData> task_data(const Fixture& f) {
  TaskData news{"news", {}};
  TaskData qa{"csqa", {}};
  for (const auto& a : f.news) news.examples.push_back(encode_example(f.news_spec, a, f.bundle.vocab));
  for (const auto& q : f.questions) qa.examples.push_back(encode_example(f.csqa_spec, q, f.bundle.vocab));
  return {news, qa};
}

TEST(FitTest, DeterministicHistoriesAndCheckpoints) {
  auto a = make_fixture();
  auto b = make_fixture();
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.epochs = 5;
  cfg.seed = 7;
  const auto ha = fit(a.bundle, task_data(a), cfg);
  const auto hb = fit(b.bundle, task_data(b), cfg);
  EXPECT_EQ(ha, hb);
  ASSERT_EQ(ha.at("news").size(), 5u);
  EXPECT_LT(ha.at("news").back(), ha.at("news").front());
  EXPECT_LT(ha.at("csqa").back(), ha.at("csqa").front());
  std::ostringstream sa, sb;
  a.bundle.save(sa);
  b.bundle.save(sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(FitTest, SingleTaskAndEmptyTask) {
  auto f = make_fixture();
  auto data = task_data(f);
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto h = fit(f.bundle, {data[0]}, cfg);
  EXPECT_EQ(h.size(), 1u);
  EXPECT_EQ(h.at("news").size(), 1u);
  EXPECT_THROW(fit(f.bundle, {TaskData{"claims", {}}}, cfg), DomainError);
}

TEST(ScoreChoicesTest, Distributions) {
  auto f = make_fixture();
  CSQAItem same{"what do people need", {"water now", "water now", "water now"}, 0};
  const auto uniform = score_choices(f.bundle, same, "csqa");
  ASSERT_EQ(uniform.size(), 3);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(uniform[i], 1.0 / 3.0, 1e-12);

  CSQAItem five{"where would you find a sink", {"kitchen", "park", "sky", "car", "book"}, 0};
  const auto p = score_choices(f.bundle, five);
  EXPECT_EQ(p.size(), 5);
  EXPECT_NEAR(p.sum(), 1.0, 1e-6);
  for (const auto& q : f.questions) EXPECT_NEAR(score_choices(f.bundle, q).sum(), 1.0, 1e-6);

  CSQAItem one{"q", {"only"}, 0};
  EXPECT_THROW(score_choices(f.bundle, one, "csqa"), DomainError);
}

TEST(PredictClassTest, ProbabilitiesSumToOne) {
  auto f = make_fixture(0.5);
  for (const auto& a : f.news) {
    const auto p = predict_class(f.bundle, "news", TaskRecord{a});
    EXPECT_NEAR(p.probabilities.sum(), 1.0, 1e-6);
    Eigen::Index best;
    p.probabilities.maxCoeff(&best);
    EXPECT_EQ(p.label, static_cast<std::size_t>(best));
  }
  for (const auto& c : f.claims) {
    EXPECT_NEAR(predict_class(f.bundle, "claims", TaskRecord{c}).probabilities.sum(), 1.0, 1e-6);
  }
}

TEST(CompositeGradientTest, EveryHeadPassesGradCheck) {
  auto f = make_fixture();
  const std::map<std::string, TaskRecord> records = {
      {"news", f.news[2]}, {"csqa", f.questions[3]}, {"claims", f.claims[4]}};
  for (const auto& [name, record] : records) {
    TaskHead& head = f.bundle.head(name);
    const TaskExample ex = encode_example(head.spec, record, f.bundle.vocab);
    std::vector<Tensor*> tensors;
    for (Tensor* t : f.bundle.encoder.tensors()) {
      if (!t->name.ends_with("attention.key.bias")) tensors.push_back(t);
    }
    tensors.push_back(&head.weight);
    tensors.push_back(&head.bias);
    auto loss = [&](bool with_grad) { return example_loss(f.bundle, head, ex, with_grad); };
    const auto result = grad_check(tensors, loss, {1e-4, 100, 1});
    EXPECT_LT(result.max_relative_error, 1e-4) << name << " worst " << result.worst_tensor;
  }
}

TEST(ModelBundleTest, SaveLoadRoundTrip) {
  auto f = make_fixture();
  const auto dir = std::filesystem::temp_directory_path() / "mtnews_bundle_test";
  std::filesystem::remove_all(dir);
  f.bundle.save(dir);
  const auto loaded = ModelBundle::load(dir);
  EXPECT_EQ(loaded.config, f.bundle.config);
  EXPECT_EQ(loaded.vocab, f.bundle.vocab);
  ASSERT_EQ(loaded.heads.size(), 3u);
  EXPECT_EQ(loaded.heads[1].spec, f.csqa_spec);
  std::ostringstream a, b;
  f.bundle.save(a);
  loaded.save(b);
  EXPECT_EQ(a.str(), b.str());
  const auto pa = predict_class(f.bundle, "news", TaskRecord{f.news[0]});
  const auto pb = predict_class(loaded, "news", TaskRecord{f.news[0]});
  EXPECT_EQ(pa.probabilities, pb.probabilities);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace mtnews
