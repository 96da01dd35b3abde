#ifndef MTNEWS_MULTITASK_H_
#define MTNEWS_MULTITASK_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mtnews/corpus.h"
#include "mtnews/encoder.h"
#include "mtnews/optimizer.h"
#include "mtnews/vocabulary.h"

namespace mtnews {

enum class TaskKind { kClassification, kMultipleChoice };
std::string_view to_string(TaskKind k);

// Record fields that can feed an encoder segment.
enum class InputField { kTitle, kBody, kText, kQuestion, kChoice };
std::string_view to_string(InputField f);
std::optional<InputField> parse_input_field(std::string_view s);

struct InputRecipe {
  InputField segment_a = InputField::kTitle;
  std::optional<InputField> segment_b;
  std::size_t max_a = 128;
  std::size_t max_b = 512;
  bool operator==(const InputRecipe&) const = default;
};

// News recipes: "title", "body" (single segment) and "merged" (title as
// segment A, body as segment B).
InputRecipe news_recipe(std::string_view feature, std::size_t max_title = 128,
                        std::size_t max_body = 512);

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::kClassification;
  std::vector<std::string> labels;  // classification only
  InputRecipe recipe;
  bool operator==(const TaskSpec&) const = default;
};

TaskSpec news_task(std::string name, std::string_view feature);
TaskSpec claim_task(std::string name);
TaskSpec csqa_task(std::string name);

using TaskRecord = std::variant<NewsArticle, ClaimStatement, CSQAItem>;

// One training or inference example: a single encoded input for
// classification, one per choice for multiple choice.
struct TaskExample {
  std::vector<EncodedPair> inputs;
  std::size_t target = 0;
};

struct TaskHead {
  TaskSpec spec;
  Tensor weight;  // d x |labels|, or d x 1 for multiple choice
  Tensor bias;
};

struct ModelBundle {
  EncoderConfig config;
  EncoderParams encoder;
  Vocabulary vocab;
  std::vector<TaskHead> heads;  // registration order

  // Throws DomainError for an unknown task.
  const TaskHead& head(const std::string& task) const;
  TaskHead& head(const std::string& task);
  bool has_task(const std::string& task) const;

  // Checkpoint text: task specs, encoder config and blocks, then head
  // blocks. The vocabulary is stored separately.
  void save(std::ostream& out) const;
  static ModelBundle load(std::istream& in, Vocabulary vocab);
  // Writes `model.ckpt` and `vocab.tsv` into `dir`.
  void save(const std::filesystem::path& dir) const;
  static ModelBundle load(const std::filesystem::path& dir);
};

ModelBundle make_bundle(const EncoderConfig& config, Vocabulary vocab, std::uint64_t seed);

// Adds a head initialized from `seed` (normal with `init_std`, defaulting to
// the encoder's init_std). Throws DomainError for a duplicate name or an
// empty label set.
void register_task(ModelBundle& bundle, const TaskSpec& task, std::uint64_t seed,
                   std::optional<double> init_std = std::nullopt);

// Throws ValidationError when the record does not fit the recipe.
TaskExample encode_example(const TaskSpec& task, const TaskRecord& record, const Vocabulary& vocab);

struct ScheduledBatch {
  std::string task;
  std::size_t batch_index = 0;
  bool operator==(const ScheduledBatch&) const = default;
};

// Uniform permutation of all (task, batch) references. Throws DomainError
// naming a task that contributes no batches.
std::vector<ScheduledBatch> build_schedule(
    const std::vector<std::pair<std::string, std::size_t>>& batches_per_task, std::uint64_t seed);

struct TrainConfig {
  std::size_t batch_size = 2;
  double learning_rate = 2e-5;
  int epochs = 4;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  double momentum = 0.0;
};

// Cross-entropy of one example. With `with_grad`, gradients scaled by
// `grad_scale` flow into the shared encoder and this task's head only.
double example_loss(ModelBundle& bundle, TaskHead& head, const TaskExample& example,
                    bool with_grad, double grad_scale = 1.0, Rng* dropout_rng = nullptr);

// Owns the optimizer state for one bundle.
class MultiTaskTrainer {
 public:
  MultiTaskTrainer(ModelBundle& bundle, const TrainConfig& config);

  // Mean loss of the batch, computed before the update. Only the shared
  // encoder and the active head are updated. Throws TrainingError on a
  // non-finite loss.
  double train_step(const std::string& task, std::span<const TaskExample> batch);

 private:
  ModelBundle& bundle_;
  TrainConfig config_;
  SgdOptimizer optimizer_;
  Rng dropout_rng_;
};

struct TaskData {
  std::string task;
  std::vector<TaskExample> examples;
};

// Per task, mean batch loss of every epoch.
using LossHistory = std::map<std::string, std::vector<double>>;

// Every epoch reshuffles each task's examples into batches and permutes all
// batches with seed + epoch before running train_step over them.
LossHistory fit(ModelBundle& bundle, const std::vector<TaskData>& tasks, const TrainConfig& config);

struct ClassPrediction {
  std::size_t label = 0;
  RowVector probabilities;
};

ClassPrediction predict_class(const ModelBundle& bundle, const std::string& task,
                              const TaskRecord& record);
ClassPrediction predict_class(const ModelBundle& bundle, const std::string& task,
                              const TaskExample& example);

// Softmax over per-choice scores. Uses `task`, or the first multiple-choice
// head when empty. Throws DomainError for fewer than two choices.
RowVector score_choices(const ModelBundle& bundle, const CSQAItem& item, const std::string& task = "");
RowVector score_choices(const ModelBundle& bundle, const std::string& task, const TaskExample& example);

}  // namespace mtnews

#endif  // MTNEWS_MULTITASK_H_
