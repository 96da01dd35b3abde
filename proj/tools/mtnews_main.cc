#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mtnews/common.h"
#include "mtnews/corpus.h"
#include "mtnews/evaluation.h"
#include "mtnews/experiment.h"
#include "mtnews/jsonl.h"
#include "mtnews/synthetic.h"

namespace fs = std::filesystem;
using namespace mtnews;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitDiverged = 3;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write " + out_path);
  out << text;
}

void require_model(const ExperimentManifest& m, bool transformer, const std::string& command) {
  const bool is_transformer = m.model == ModelKind::kSingle || m.model == ModelKind::kMultiTask;
  if (is_transformer != transformer) {
    throw ValidationError("model", command + " does not train model '" + std::string(to_string(m.model)) +
                                       "'; use " + (is_transformer ? "train-mtl" : "train-baseline"));
  }
}

void print_losses(const std::vector<LossHistory>& histories) {
  for (std::size_t k = 0; k < histories.size(); ++k) {
    for (const auto& [task, losses] : histories[k]) {
      if (losses.empty()) continue;
      std::cout << "fold " << k << " " << task << ": final loss " << format_fixed(losses.back(), 4) << "\n";
    }
  }
}

void print_summary(const ExperimentReport& r) {
  std::cout << r.feature << " " << r.model << ": macro F1 " << format_fixed(100.0 * r.macro_f1, 2) << "\n";
  if (r.significance) std::cout << render_significance(*r.significance);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-level news classification experiments"};
  app.require_subcommand(1);

  std::vector<std::string> inputs;
  std::string out;
  IngestOptions ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Clean, prune and LOF-filter JSONL articles");
  ingest_cmd->add_option("inputs", inputs, "Article JSONL files")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("-o,--out", out, "Output directory")->required();
  ingest_cmd->add_option("--min-per-source", ingest.min_per_source, "Drop sources with fewer articles");
  ingest_cmd->add_option("--cap-per-source", ingest.cap_per_source, "Keep at most this many per source");
  ingest_cmd->add_option("--lof-k", ingest.length_filter.k, "LOF neighbourhood size");
  ingest_cmd->add_option("--lof-threshold", ingest.length_filter.threshold, "LOF score above which to drop");
  ingest_cmd->add_option("--seed", ingest.seed, "Sampling seed for the per-source cap");

  std::string stats_input;
  auto* stats_cmd = app.add_subcommand("stats", "Per-type corpus statistics as CSV");
  stats_cmd->add_option("input", stats_input, "Article JSONL file")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("-o,--out", out, "Write here instead of stdout");

  std::string manifest_path;
  auto add_manifest = [&](CLI::App* cmd) {
    cmd->add_option("manifest", manifest_path, "Experiment manifest")->required()->check(CLI::ExistingFile);
  };
  auto* split_cmd = app.add_subcommand("split", "Write the fold plans of an experiment");
  add_manifest(split_cmd);
  auto* baseline_cmd = app.add_subcommand("train-baseline", "Train the SVM or RDEL baseline of every fold");
  add_manifest(baseline_cmd);
  auto* mtl_cmd = app.add_subcommand("train-mtl", "Train the single-task or multi-task encoder of every fold");
  add_manifest(mtl_cmd);

  std::string compare;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score trained folds and write reports");
  add_manifest(eval_cmd);
  eval_cmd->add_option("--compare", compare, "Baseline run directory for a paired t-test")
      ->check(CLI::ExistingDirectory);

  auto* run_cmd = app.add_subcommand("run", "split, train and evaluate in one go");
  add_manifest(run_cmd);
  run_cmd->add_option("--compare", compare, "Baseline run directory for a paired t-test")
      ->check(CLI::ExistingDirectory);

  std::vector<std::string> run_dirs;
  auto* report_cmd = app.add_subcommand("report", "Combine evaluated runs into one results table");
  report_cmd->add_option("runs", run_dirs, "Run directories, in row order")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("-o,--out", out, "Write here instead of stdout");

  SyntheticNewsOptions news_options;
  std::size_t csqa_items = 300, csqa_choices = 5, claims = 300, claims_train = 200;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic news, csqa and claim fixtures");
  synth_cmd->add_option("-o,--out", out, "Output directory")->required();
  synth_cmd->add_option("--articles", news_options.articles, "News articles");
  synth_cmd->add_option("--sources-per-type", news_options.sources_per_type, "Publishers per source type");
  synth_cmd->add_option("--csqa", csqa_items, "Multiple-choice items");
  synth_cmd->add_option("--choices", csqa_choices, "Choices per item");
  synth_cmd->add_option("--claims", claims, "Claim statements");
  synth_cmd->add_option("--claims-train", claims_train, "Claims in the train split");
  synth_cmd->add_option("--cue-rate", news_options.cue_rate, "Share of news word slots holding a class cue")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--crosstalk", news_options.crosstalk, "Chance a cue word comes from a random type")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", news_options.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*ingest_cmd) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      const CorpusStats stats = run_ingest(paths, out, ingest);
      std::cout << render_stats_csv(stats);
    } else if (*stats_cmd) {
      emit(render_stats_csv(corpus_stats(load_articles(stats_input))), out);
    } else if (*split_cmd) {
      const auto plans = run_split(load_manifest(manifest_path));
      std::cout << plans.size() << " fold plan(s) written\n";
    } else if (*baseline_cmd || *mtl_cmd) {
      const ExperimentManifest m = load_manifest(manifest_path);
      require_model(m, static_cast<bool>(*mtl_cmd), *mtl_cmd ? "train-mtl" : "train-baseline");
      print_losses(run_train(m));
    } else if (*eval_cmd) {
      const std::optional<fs::path> baseline = compare.empty() ? std::nullopt : std::optional<fs::path>(compare);
      print_summary(run_evaluate(load_manifest(manifest_path), baseline));
    } else if (*run_cmd) {
      const std::optional<fs::path> baseline = compare.empty() ? std::nullopt : std::optional<fs::path>(compare);
      print_summary(run_experiment(load_manifest(manifest_path), baseline));
    } else if (*report_cmd) {
      std::vector<ExperimentReport> reports;
      for (const auto& dir : run_dirs) reports.push_back(load_summary(dir));
      std::string text = render_results_table(reports);
      for (const auto& r : reports) {
        if (r.significance) text += "\n" + render_significance(*r.significance);
      }
      emit(text, out);
    } else if (*synth_cmd) {
      fs::create_directories(out);
      save_articles(fs::path(out) / "news.jsonl", synthetic_news(news_options));
      std::ofstream csqa_out(fs::path(out) / "csqa.jsonl", std::ios::binary);
      write_csqa(csqa_out, synthetic_csqa(csqa_items, csqa_choices, news_options.seed));
      std::ofstream claims_out(fs::path(out) / "claims.jsonl", std::ios::binary);
      write_claims(claims_out, synthetic_claims(claims, claims_train, news_options.seed));
    }
  } catch (const TrainingError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitOk;
}
