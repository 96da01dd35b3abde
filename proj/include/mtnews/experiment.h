#ifndef MTNEWS_EXPERIMENT_H_
#define MTNEWS_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtnews/classifiers.h"
#include "mtnews/encoder.h"
#include "mtnews/evaluation.h"
#include "mtnews/multitask.h"
#include "mtnews/pretrain.h"
#include "mtnews/splits.h"

namespace mtnews {

// `key = value` lines; blank lines and lines starting with '#' are skipped.
using Settings = std::map<std::string, std::string>;

// Throws ParseError (with the line number) for a line without '=' or a
// repeated key.
Settings parse_settings(std::istream& in);
Settings load_settings(const std::filesystem::path& path);

enum class ExperimentProtocol { kForecasting, kUnseenSource, kClaim };
enum class ModelKind { kSvm, kRdel, kSingle, kMultiTask };

std::string_view to_string(ExperimentProtocol p);
std::string_view to_string(ModelKind m);
// Column names used in reports: SVM, RDEL, BERT, MTBERT.
std::string_view display_name(ModelKind m);

// Every knob an experiment can set. Keys mirror the field paths, e.g.
// `train.learning_rate` or `encoder.d_model`.
struct Hyperparameters {
  EncoderConfig encoder;  // vocab_size is filled from the built vocabulary
  // 0 derives max_positions from the longest registered recipe.
  std::size_t max_positions = 0;
  std::size_t vocab_max_size = 30000;
  TrainConfig train;
  // Head init scale; absent means the encoder's init_std.
  std::optional<double> head_init_std;
  PretrainConfig pretrain{.steps = 0};
  SvmConfig svm;
  MlpConfig mlp;
  std::size_t ngram_max_features = 25000;
  int ngram_max_ngram = 2;
  std::size_t max_title = 128;
  std::size_t max_body = 512;
  std::size_t max_text = 128;
  std::size_t max_question = 64;
  std::size_t max_choice = 32;
  UnseenSourceOptions unseen;
  ForecastingOptions forecasting;
};

// Starts from the defaults and applies `settings`. Throws ValidationError
// naming an unknown key or an unparsable value.
Hyperparameters resolve_hyperparameters(const Settings& settings);

struct ExperimentManifest {
  std::string name;
  ExperimentProtocol protocol = ExperimentProtocol::kForecasting;
  std::string feature = "merged";  // title | body | merged; "text" for claims
  ModelKind model = ModelKind::kSvm;
  std::filesystem::path articles;
  std::filesystem::path claims;
  std::filesystem::path csqa;
  // Existing fold plans to reuse instead of building new ones.
  std::optional<std::filesystem::path> splits;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  // Contents of the optional `config` file overlaid with every manifest
  // key that contains a '.'.
  Settings hyperparameters;
};

// Relative dataset paths resolve against `base_dir`; a relative output
// directory resolves against `output_root`. Throws ValidationError naming a
// missing or invalid field or an unsupported protocol/model/feature
// combination.
ExperimentManifest parse_manifest(const Settings& settings, const std::filesystem::path& base_dir,
                                  const std::filesystem::path& output_root);
// Output root is $MTNEWS_OUTPUT_ROOT when set, else the manifest directory.
ExperimentManifest load_manifest(const std::filesystem::path& path);

// Writes `folds.jsonl` into the output directory and returns the plans.
std::vector<FoldPlan> run_split(const ExperimentManifest& manifest);

// Trains one model per fold into `fold<k>/` under the output directory,
// reusing `folds.jsonl` when present. Per-task loss histories of
// transformer runs are returned and written to `loss_history.csv`.
std::vector<LossHistory> run_train(const ExperimentManifest& manifest);

// Scores every fold's checkpoint on its test side and writes predictions,
// confusion matrices, report.{csv,md}, summary.json, fold_scores.csv and,
// for forecasting, monthly.csv. With `compare_with`, the fold scores of that
// run directory become the baseline of a significance block. Throws
// ValidationError when a checkpoint is missing.
ExperimentReport run_evaluate(const ExperimentManifest& manifest,
                              const std::optional<std::filesystem::path>& compare_with = std::nullopt);

// split, train and evaluate.
ExperimentReport run_experiment(const ExperimentManifest& manifest,
                                const std::optional<std::filesystem::path>& compare_with = std::nullopt);

// Reads summary.json of a run directory.
ExperimentReport load_summary(const std::filesystem::path& run_dir);

struct IngestOptions {
  std::size_t min_per_source = 10;
  std::size_t cap_per_source = 250;
  LengthFilterOptions length_filter;
  std::uint64_t seed = 0;
};

// Cleans, prunes and LOF-filters the articles of `inputs`, then writes
// `articles.jsonl` and `stats.csv` into `out_dir`. Throws ValidationError on
// duplicate ids.
CorpusStats run_ingest(const std::vector<std::filesystem::path>& inputs,
                       const std::filesystem::path& out_dir, const IngestOptions& options);

}  // namespace mtnews

#endif  // MTNEWS_EXPERIMENT_H_
