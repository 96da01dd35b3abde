#include "mtnews/experiment.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "mtnews/common.h"
#include "mtnews/corpus.h"
#include "mtnews/jsonl.h"
#include "mtnews/ngram_features.h"
#include "mtnews/text_clean.h"
#include "mtnews/vocabulary.h"

namespace mtnews {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::ifstream open_for_reading(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("path", "cannot open " + path.string());
  return in;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("output", "cannot write " + path.string());
  out << text;
}

template <typename Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ostringstream out;
  fn(out);
  write_file(path, out.str());
}

// ---- hyperparameters -------------------------------------------------------

template <typename T>
T parse_setting(const std::string& key, const std::string& value) {
  try {
    if constexpr (std::is_same_v<T, double>) {
      return parse_double(value);
    } else {
      const long long v = parse_int(value);
      if constexpr (std::is_unsigned_v<T>) {
        if (v < 0) throw ParseError(0, "negative");
      }
      return static_cast<T>(v);
    }
  } catch (const ParseError&) {
    throw ValidationError(key, "invalid value '" + value + "' for " + key);
  }
}

using Setter = std::function<void(Hyperparameters&, const std::string& key, const std::string& value)>;

template <typename T>
Setter bind(T Hyperparameters::*field) {
  return [field](Hyperparameters& h, const std::string& k, const std::string& v) {
    h.*field = parse_setting<T>(k, v);
  };
}

template <typename Group, typename T>
Setter bind(Group Hyperparameters::*group, T Group::*field) {
  return [group, field](Hyperparameters& h, const std::string& k, const std::string& v) {
    (h.*group).*field = parse_setting<T>(k, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"encoder.layers", bind(&Hyperparameters::encoder, &EncoderConfig::layers)},
      {"encoder.heads", bind(&Hyperparameters::encoder, &EncoderConfig::heads)},
      {"encoder.d_model", bind(&Hyperparameters::encoder, &EncoderConfig::d_model)},
      {"encoder.d_ff", bind(&Hyperparameters::encoder, &EncoderConfig::d_ff)},
      {"encoder.dropout", bind(&Hyperparameters::encoder, &EncoderConfig::dropout)},
      {"encoder.init_std", bind(&Hyperparameters::encoder, &EncoderConfig::init_std)},
      {"encoder.max_positions", bind(&Hyperparameters::max_positions)},
      {"vocab.max_size", bind(&Hyperparameters::vocab_max_size)},
      {"head.init_std",
       [](Hyperparameters& h, const std::string& k, const std::string& v) {
         h.head_init_std = parse_setting<double>(k, v);
       }},
      {"train.batch_size", bind(&Hyperparameters::train, &TrainConfig::batch_size)},
      {"train.learning_rate", bind(&Hyperparameters::train, &TrainConfig::learning_rate)},
      {"train.epochs", bind(&Hyperparameters::train, &TrainConfig::epochs)},
      {"train.clip_norm", bind(&Hyperparameters::train, &TrainConfig::clip_norm)},
      {"train.momentum", bind(&Hyperparameters::train, &TrainConfig::momentum)},
      {"pretrain.steps", bind(&Hyperparameters::pretrain, &PretrainConfig::steps)},
      {"pretrain.batch_size", bind(&Hyperparameters::pretrain, &PretrainConfig::batch_size)},
      {"pretrain.mask_probability", bind(&Hyperparameters::pretrain, &PretrainConfig::mask_probability)},
      {"pretrain.learning_rate",
       [](Hyperparameters& h, const std::string& k, const std::string& v) {
         h.pretrain.optimizer.learning_rate = parse_setting<double>(k, v);
       }},
      {"svm.epochs", bind(&Hyperparameters::svm, &SvmConfig::epochs)},
      {"svm.learning_rate", bind(&Hyperparameters::svm, &SvmConfig::learning_rate)},
      {"svm.l2", bind(&Hyperparameters::svm, &SvmConfig::l2)},
      {"mlp.hidden", bind(&Hyperparameters::mlp, &MlpConfig::hidden)},
      {"mlp.epochs", bind(&Hyperparameters::mlp, &MlpConfig::epochs)},
      {"mlp.learning_rate", bind(&Hyperparameters::mlp, &MlpConfig::learning_rate)},
      {"mlp.momentum", bind(&Hyperparameters::mlp, &MlpConfig::momentum)},
      {"mlp.clip_norm", bind(&Hyperparameters::mlp, &MlpConfig::clip_norm)},
      {"mlp.patience", bind(&Hyperparameters::mlp, &MlpConfig::patience)},
      {"mlp.validation_fraction", bind(&Hyperparameters::mlp, &MlpConfig::validation_fraction)},
      {"mlp.batch_size", bind(&Hyperparameters::mlp, &MlpConfig::batch_size)},
      {"ngram.max_features", bind(&Hyperparameters::ngram_max_features)},
      {"ngram.max_ngram", bind(&Hyperparameters::ngram_max_ngram)},
      {"recipe.max_title", bind(&Hyperparameters::max_title)},
      {"recipe.max_body", bind(&Hyperparameters::max_body)},
      {"recipe.max_text", bind(&Hyperparameters::max_text)},
      {"recipe.max_question", bind(&Hyperparameters::max_question)},
      {"recipe.max_choice", bind(&Hyperparameters::max_choice)},
      {"unseen.train_fraction", bind(&Hyperparameters::unseen, &UnseenSourceOptions::train_fraction)},
      {"unseen.repeats", bind(&Hyperparameters::unseen, &UnseenSourceOptions::repeats)},
      {"forecasting.window_start_year", bind(&Hyperparameters::forecasting, &ForecastingOptions::window_start_year)},
      {"forecasting.cutoff_year", bind(&Hyperparameters::forecasting, &ForecastingOptions::cutoff_year)},
  };
  return table;
}

// ---- data ------------------------------------------------------------------

struct Datasets {
  std::vector<NewsArticle> articles;
  std::vector<ClaimStatement> claims;
  std::vector<CSQAItem> csqa;
};

std::string claim_id(std::size_t index) { return "claim" + std::to_string(index); }

Datasets load_datasets(const ExperimentManifest& m) {
  Datasets d;
  if (m.protocol == ExperimentProtocol::kClaim) {
    d.claims = load_claims(m.claims);
    for (auto& c : d.claims) c.text = clean_text(c.text);
  } else {
    d.articles = load_articles(m.articles);
    std::set<std::string> ids;
    for (auto& a : d.articles) {
      if (!ids.insert(a.id).second) throw ValidationError("id", "duplicate article id '" + a.id + "'");
      a.title = clean_text(a.title);
      a.body = clean_text(a.body);
    }
  }
  if (m.model == ModelKind::kMultiTask) {
    d.csqa = load_csqa(m.csqa);
    for (auto& q : d.csqa) {
      q.question = clean_text(q.question);
      for (auto& c : q.choices) c = clean_text(c);
    }
  }
  return d;
}

std::vector<FoldPlan> build_folds(const ExperimentManifest& m, const Hyperparameters& hp,
                                  const Datasets& d) {
  switch (m.protocol) {
    case ExperimentProtocol::kForecasting: {
      FoldPlan plan = forecasting_split(d.articles, hp.forecasting);
      plan.seed = m.seed;
      return {plan};
    }
    case ExperimentProtocol::kUnseenSource: {
      UnseenSourceOptions opts = hp.unseen;
      opts.seed = m.seed;
      return unseen_source_folds(d.articles, opts);
    }
    case ExperimentProtocol::kClaim: {
      // The claim data ships with its own split; kept as a single fold.
      FoldPlan plan;
      plan.protocol = Protocol::kForecasting;
      plan.seed = m.seed;
      for (std::size_t i = 0; i < d.claims.size(); ++i) {
        (d.claims[i].split == DataSplit::kTrain ? plan.train_ids : plan.test_ids).push_back(claim_id(i));
      }
      if (plan.train_ids.empty() || plan.test_ids.empty()) {
        throw ProtocolError("claim data needs both train and test statements");
      }
      return {plan};
    }
  }
  return {};
}

fs::path folds_path(const ExperimentManifest& m) { return m.output / "folds.jsonl"; }
fs::path fold_dir(const ExperimentManifest& m, std::size_t k) { return m.output / ("fold" + std::to_string(k)); }

std::vector<FoldPlan> folds_for(const ExperimentManifest& m, const Hyperparameters& hp, const Datasets& d) {
  if (m.splits) return load_fold_plans(*m.splits);
  if (fs::exists(folds_path(m))) return load_fold_plans(folds_path(m));
  auto plans = build_folds(m, hp, d);
  fs::create_directories(m.output);
  save_fold_plans(folds_path(m), plans);
  return plans;
}

// Records of one side of a fold, in fold order.
template <typename Record>
std::vector<const Record*> select(const std::vector<std::string>& ids,
                                  const std::unordered_map<std::string, const Record*>& by_id) {
  std::vector<const Record*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("splits", "fold references unknown id '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

std::unordered_map<std::string, const NewsArticle*> index_articles(const std::vector<NewsArticle>& a) {
  std::unordered_map<std::string, const NewsArticle*> out;
  for (const auto& x : a) out.emplace(x.id, &x);
  return out;
}

std::unordered_map<std::string, const ClaimStatement*> index_claims(const std::vector<ClaimStatement>& c) {
  std::unordered_map<std::string, const ClaimStatement*> out;
  for (std::size_t i = 0; i < c.size(); ++i) out.emplace(claim_id(i), &c[i]);
  return out;
}

std::string feature_text(const NewsArticle& a, const std::string& feature) {
  if (feature == "title") return a.title;
  if (feature == "body") return a.body;
  return a.title + " " + a.body;
}

std::vector<std::string> class_labels(const ExperimentManifest& m) {
  std::vector<std::string> labels;
  if (m.protocol == ExperimentProtocol::kClaim) {
    for (ClaimLabel l : kAllClaimLabels) labels.emplace_back(to_string(l));
  } else {
    for (SourceType t : kAllSourceTypes) labels.emplace_back(to_string(t));
  }
  return labels;
}

std::vector<std::string> display_labels(const ExperimentManifest& m) {
  if (m.protocol == ExperimentProtocol::kClaim) return class_labels(m);
  std::vector<std::string> out;
  for (SourceType t : kAllSourceTypes) out.emplace_back(display_name(t));
  return out;
}

std::string feature_display(const std::string& feature) {
  std::string s = feature;
  if (!s.empty()) s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// Uniform view over the two labelled record types.
struct LabelledItem {
  std::string id;
  std::size_t label = 0;
  const NewsArticle* article = nullptr;
  const ClaimStatement* claim = nullptr;
  std::string text(const std::string& feature) const {
    return article ? feature_text(*article, feature) : claim->text;
  }
};

std::vector<LabelledItem> fold_side(const ExperimentManifest& m, const Datasets& d,
                                    const std::vector<std::string>& ids) {
  std::vector<LabelledItem> out;
  if (m.protocol == ExperimentProtocol::kClaim) {
    const auto by_id = index_claims(d.claims);
    for (const ClaimStatement* c : select(ids, by_id)) {
      out.push_back({"", static_cast<std::size_t>(c->label), nullptr, c});
    }
  } else {
    const auto by_id = index_articles(d.articles);
    for (const NewsArticle* a : select(ids, by_id)) {
      out.push_back({a->id, static_cast<std::size_t>(a->source_type), a, nullptr});
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].id.empty()) out[i].id = ids[i];
  }
  return out;
}

std::uint64_t fold_seed(const ExperimentManifest& m, std::size_t k) {
  return m.seed * 1000003ULL + static_cast<std::uint64_t>(k);
}

// ---- baselines -------------------------------------------------------------

std::size_t annotation_dim(const std::vector<LabelledItem>& items) {
  std::size_t dim = 0;
  for (const auto& it : items) {
    if (it.claim) dim = std::max(dim, it.claim->annotations.size());
  }
  return dim;
}

SparseVector baseline_features(const ExperimentManifest& m, const LabelledItem& item,
                               const NgramVocabulary& vocab, std::size_t annotations) {
  if (m.model == ModelKind::kRdel) return rdel_sparse_features(item.article->title, item.article->body, vocab);
  if (item.claim) {
    ClaimStatement s = *item.claim;
    s.annotations.resize(std::min(s.annotations.size(), annotations));
    return claim_features(s, vocab, annotations);
  }
  return tfidf_transform(item.text(m.feature), vocab);
}

void train_baseline_fold(const ExperimentManifest& m, const Hyperparameters& hp,
                         const std::vector<LabelledItem>& train, std::size_t k, const fs::path& dir) {
  std::vector<std::string> texts;
  for (const auto& it : train) {
    if (m.model == ModelKind::kRdel) {
      texts.push_back(it.article->title);
      texts.push_back(it.article->body);
    } else {
      texts.push_back(it.text(m.feature));
    }
  }
  const NgramVocabulary vocab = build_ngram_vocab(texts, hp.ngram_max_features, hp.ngram_max_ngram);
  const std::size_t annotations = annotation_dim(train);
  std::vector<SparseVector> x;
  std::vector<std::size_t> y;
  for (const auto& it : train) {
    x.push_back(baseline_features(m, it, vocab, annotations));
    y.push_back(it.label);
  }
  const auto labels = class_labels(m);
  write_with(dir / "ngram_vocab.txt", [&](std::ostream& o) { vocab.save(o); });
  write_file(dir / "features.txt", "annotation_dim " + std::to_string(annotations) + "\n");
  if (m.model == ModelKind::kRdel) {
    MlpConfig cfg = hp.mlp;
    cfg.seed = fold_seed(m, k);
    const auto result = train_rdel(x, y, labels, vocab, cfg);
    write_with(dir / "model.txt", [&](std::ostream& o) { result.model.save(o); });
    write_with(dir / "loss_history.csv", [&](std::ostream& o) {
      o << "epoch,train_loss,validation_loss\n";
      for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
        o << (e + 1) << ',' << format_double(result.train_loss[e]) << ','
          << (e < result.validation_loss.size() ? format_double(result.validation_loss[e]) : "NA") << '\n';
      }
    });
  } else {
    const std::size_t width = m.protocol == ExperimentProtocol::kClaim
                                  ? claim_feature_width(vocab, annotations)
                                  : vocab.size();
    const auto model = train_linear_svm(x, y, labels, width, hp.svm);
    write_with(dir / "model.txt", [&](std::ostream& o) { model.save(o); });
  }
}

std::vector<std::size_t> predict_baseline_fold(const ExperimentManifest& m,
                                               const std::vector<LabelledItem>& test, const fs::path& dir) {
  for (const char* f : {"ngram_vocab.txt", "features.txt", "model.txt"}) {
    if (!fs::exists(dir / f)) throw ValidationError("checkpoint", "missing checkpoint " + (dir / f).string());
  }
  auto vin = open_for_reading(dir / "ngram_vocab.txt");
  const NgramVocabulary vocab = NgramVocabulary::load(vin);
  auto fin = open_for_reading(dir / "features.txt");
  std::string tag;
  std::size_t annotations = 0;
  fin >> tag >> annotations;
  auto min = open_for_reading(dir / "model.txt");
  std::vector<std::size_t> out;
  if (m.model == ModelKind::kRdel) {
    const auto model = MlpClassifier::load(min);
    for (const auto& it : test) out.push_back(model.predict(baseline_features(m, it, vocab, annotations)));
  } else {
    const auto model = LinearClassifier::load(min);
    for (const auto& it : test) out.push_back(model.predict(baseline_features(m, it, vocab, annotations)));
  }
  return out;
}

// ---- transformer runs ------------------------------------------------------

TaskSpec main_task(const ExperimentManifest& m, const Hyperparameters& hp) {
  if (m.protocol == ExperimentProtocol::kClaim) {
    TaskSpec t = claim_task("claims");
    t.recipe.max_a = hp.max_text;
    return t;
  }
  TaskSpec t = news_task("news", m.feature);
  t.recipe = news_recipe(m.feature, hp.max_title, hp.max_body);
  return t;
}

TaskSpec auxiliary_task(const Hyperparameters& hp) {
  TaskSpec t = csqa_task("csqa");
  t.recipe.max_a = hp.max_question;
  t.recipe.max_b = hp.max_choice;
  return t;
}

std::size_t recipe_positions(const InputRecipe& r) {
  return 1 + r.max_a + 1 + (r.segment_b ? r.max_b + 1 : 0);
}

TaskRecord as_record(const LabelledItem& it) {
  if (it.article) return *it.article;
  return *it.claim;
}

std::vector<std::vector<std::string>> pretraining_documents(const std::vector<LabelledItem>& train) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& it : train) {
    std::vector<std::string> sentences;
    std::string current;
    const std::string text = it.article ? it.article->title + " . " + it.article->body : it.claim->text;
    for (const auto& tok : split_whitespace(text)) {
      if (tok == "." || tok == "!" || tok == "?") {
        if (!current.empty()) sentences.push_back(current);
        current.clear();
      } else {
        current += (current.empty() ? "" : " ") + tok;
      }
    }
    if (!current.empty()) sentences.push_back(current);
    if (sentences.size() >= 2) docs.push_back(std::move(sentences));
  }
  return docs;
}

LossHistory train_transformer_fold(const ExperimentManifest& m, const Hyperparameters& hp,
                                   const Datasets& d, const std::vector<LabelledItem>& train,
                                   std::size_t k, const fs::path& dir) {
  const bool multi = m.model == ModelKind::kMultiTask;
  const TaskSpec task = main_task(m, hp);
  const TaskSpec aux = auxiliary_task(hp);

  std::vector<std::string> texts;
  for (const auto& it : train) {
    if (it.article) {
      texts.push_back(it.article->title);
      texts.push_back(it.article->body);
    } else {
      texts.push_back(it.claim->text);
    }
  }
  if (multi) {
    for (const auto& q : d.csqa) {
      texts.push_back(q.question);
      texts.insert(texts.end(), q.choices.begin(), q.choices.end());
    }
  }
  Vocabulary vocab = build_vocab(texts, hp.vocab_max_size);

  EncoderConfig config = hp.encoder;
  config.vocab_size = vocab.size();
  config.max_positions = hp.max_positions;
  if (config.max_positions == 0) {
    config.max_positions = recipe_positions(task.recipe);
    if (multi) config.max_positions = std::max(config.max_positions, recipe_positions(aux.recipe));
  }
  const std::uint64_t seed = fold_seed(m, k);
  ModelBundle bundle = make_bundle(config, vocab, seed);
  if (hp.pretrain.steps > 0) {
    const auto docs = pretraining_documents(train);
    if (!docs.empty()) {
      PretrainConfig pc = hp.pretrain;
      pc.seed = seed;
      if (3 + pc.max_a + pc.max_b > config.max_positions) {
        pc.max_a = pc.max_b = (config.max_positions - 3) / 2;
      }
      bundle.encoder = pretrain_mlm_nsp(make_nsp_pairs(docs, seed), bundle.vocab, config, pc, bundle.encoder).params;
    }
  }
  register_task(bundle, task, seed + 1, hp.head_init_std);
  std::vector<TaskData> data;
  data.push_back({task.name, {}});
  for (const auto& it : train) data.back().examples.push_back(encode_example(task, as_record(it), bundle.vocab));
  if (multi) {
    register_task(bundle, aux, seed + 2, hp.head_init_std);
    data.push_back({aux.name, {}});
    for (const auto& q : d.csqa) data.back().examples.push_back(encode_example(aux, q, bundle.vocab));
  }
  TrainConfig tc = hp.train;
  tc.seed = seed;
  const LossHistory history = fit(bundle, data, tc);
  bundle.save(dir);
  write_with(dir / "loss_history.csv", [&](std::ostream& o) {
    o << "epoch,task,mean_loss\n";
    for (const auto& [name, losses] : history) {
      for (std::size_t e = 0; e < losses.size(); ++e) o << (e + 1) << ',' << name << ',' << format_double(losses[e]) << '\n';
    }
  });
  return history;
}

std::vector<std::size_t> predict_transformer_fold(const ExperimentManifest& m,
                                                  const std::vector<LabelledItem>& test, const fs::path& dir) {
  for (const char* f : {"model.ckpt", "vocab.tsv"}) {
    if (!fs::exists(dir / f)) throw ValidationError("checkpoint", "missing checkpoint " + (dir / f).string());
  }
  const ModelBundle bundle = ModelBundle::load(dir);
  const std::string task = m.protocol == ExperimentProtocol::kClaim ? "claims" : "news";
  std::vector<std::size_t> out;
  for (const auto& it : test) out.push_back(predict_class(bundle, task, as_record(it)).label);
  return out;
}

bool is_transformer(ModelKind k) { return k == ModelKind::kSingle || k == ModelKind::kMultiTask; }

// ---- summaries -------------------------------------------------------------

json report_to_json(const ExperimentReport& r) {
  json j;
  j["feature"] = r.feature;
  j["model"] = r.model;
  j["display_labels"] = r.display_labels;
  j["labels"] = r.confusion.labels;
  j["confusion"] = r.confusion.counts;
  j["per_class_f1"] = r.per_class_f1;
  j["macro_f1"] = r.macro_f1;
  if (r.folds) j["folds"] = {{"macro_f1", r.folds->macro_f1}, {"mean", r.folds->mean}, {"stddev", r.folds->stddev}};
  if (r.monthly) {
    json months = json::array();
    for (const auto& v : *r.monthly) months.push_back(v ? json(*v) : json(nullptr));
    j["monthly"] = months;
  }
  if (r.significance) {
    const auto& s = *r.significance;
    j["significance"] = {{"baseline", s.baseline}, {"candidate", s.candidate}, {"t", s.test.t},
                         {"df", s.test.df}, {"p", s.test.p}, {"cohens_d", s.effect_size}};
  }
  return j;
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.feature = j.at("feature").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.display_labels = j.at("display_labels").get<std::vector<std::string>>();
  r.confusion.labels = j.at("labels").get<std::vector<std::string>>();
  r.confusion.counts = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
  r.per_class_f1 = j.at("per_class_f1").get<std::vector<double>>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  if (j.contains("folds")) {
    FoldSummary f;
    f.macro_f1 = j["folds"].at("macro_f1").get<std::vector<double>>();
    f.mean = j["folds"].at("mean").get<double>();
    f.stddev = j["folds"].at("stddev").get<double>();
    r.folds = f;
  }
  if (j.contains("monthly")) {
    MonthlySeries s;
    for (std::size_t i = 0; i < 12; ++i) {
      if (!j["monthly"].at(i).is_null()) s[i] = j["monthly"][i].get<double>();
    }
    r.monthly = s;
  }
  if (j.contains("significance")) {
    const json& s = j["significance"];
    SignificanceBlock b;
    b.baseline = s.at("baseline").get<std::string>();
    b.candidate = s.at("candidate").get<std::string>();
    b.test.t = s.at("t").get<double>();
    b.test.df = s.at("df").get<double>();
    b.test.p = s.at("p").get<double>();
    b.effect_size = s.at("cohens_d").get<double>();
    r.significance = b;
  }
  return r;
}

std::vector<double> read_fold_scores(const fs::path& run_dir) {
  auto in = open_for_reading(run_dir / "fold_scores.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> scores;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    scores.push_back(parse_double(line.substr(comma + 1)));
  }
  return scores;
}

}  // namespace

Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(number, "line " + std::to_string(number) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ParseError(number, "line " + std::to_string(number) + ": empty key");
    if (!out.emplace(key, value).second) {
      throw ParseError(number, "line " + std::to_string(number) + ": repeated key '" + key + "'");
    }
  }
  return out;
}

Settings load_settings(const fs::path& path) {
  auto in = open_for_reading(path);
  return parse_settings(in);
}

std::string_view to_string(ExperimentProtocol p) {
  switch (p) {
    case ExperimentProtocol::kForecasting: return "forecasting";
    case ExperimentProtocol::kUnseenSource: return "unseen_source";
    case ExperimentProtocol::kClaim: return "claim";
  }
  return "?";
}

std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::kSvm: return "svm";
    case ModelKind::kRdel: return "rdel";
    case ModelKind::kSingle: return "single";
    case ModelKind::kMultiTask: return "mtl";
  }
  return "?";
}

std::string_view display_name(ModelKind m) {
  switch (m) {
    case ModelKind::kSvm: return "SVM";
    case ModelKind::kRdel: return "RDEL";
    case ModelKind::kSingle: return "BERT";
    case ModelKind::kMultiTask: return "MTBERT";
  }
  return "?";
}

Hyperparameters resolve_hyperparameters(const Settings& settings) {
  Hyperparameters hp;
  for (const auto& [key, value] : settings) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ValidationError(key, "unknown setting '" + key + "'");
    it->second(hp, key, value);
  }
  if (hp.train.batch_size == 0) throw ValidationError("train.batch_size", "train.batch_size must be at least 1");
  if (!(hp.train.learning_rate > 0.0)) throw ValidationError("train.learning_rate", "train.learning_rate must be positive");
  if (hp.ngram_max_ngram < 1 || hp.ngram_max_ngram > 2) throw ValidationError("ngram.max_ngram", "ngram.max_ngram must be 1 or 2");
  EncoderConfig probe = hp.encoder;
  probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 6);
  probe.max_positions = hp.max_positions == 0 ? 1024 : hp.max_positions;
  try {
    probe.validate();
  } catch (const DomainError& e) {
    throw ValidationError("encoder", e.what());
  }
  return hp;
}

ExperimentManifest parse_manifest(const Settings& settings, const fs::path& base_dir, const fs::path& output_root) {
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    auto it = settings.find(key);
    if (it == settings.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  auto require = [&](const std::string& key) {
    auto v = get(key);
    if (!v) throw ValidationError(key, "manifest is missing '" + key + "'");
    return *v;
  };
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  static const std::set<std::string> known = {"name", "protocol", "feature", "model", "articles", "claims",
                                              "csqa", "splits", "config", "seed", "output"};

  ExperimentManifest m;
  m.name = require("name");
  const std::string protocol = require("protocol");
  if (protocol == "forecasting") m.protocol = ExperimentProtocol::kForecasting;
  else if (protocol == "unseen_source") m.protocol = ExperimentProtocol::kUnseenSource;
  else if (protocol == "claim") m.protocol = ExperimentProtocol::kClaim;
  else throw ValidationError("protocol", "unknown protocol '" + protocol + "'");

  const std::string model = require("model");
  if (model == "svm") m.model = ModelKind::kSvm;
  else if (model == "rdel") m.model = ModelKind::kRdel;
  else if (model == "single") m.model = ModelKind::kSingle;
  else if (model == "mtl") m.model = ModelKind::kMultiTask;
  else throw ValidationError("model", "unknown model '" + model + "'");

  if (m.protocol == ExperimentProtocol::kClaim) {
    m.feature = get("feature").value_or("text");
    if (m.feature != "text") throw ValidationError("feature", "claim experiments use feature = text");
    if (m.model == ModelKind::kRdel) throw ValidationError("model", "rdel needs a headline and body; not available for claims");
    m.claims = resolve(require("claims"));
  } else {
    m.feature = get("feature").value_or("merged");
    if (m.feature != "title" && m.feature != "body" && m.feature != "merged") {
      throw ValidationError("feature", "unknown feature '" + m.feature + "'");
    }
    if (m.model == ModelKind::kRdel && m.feature != "merged") {
      throw ValidationError("feature", "rdel compares headline and body, so it needs feature = merged");
    }
    m.articles = resolve(require("articles"));
  }
  if (m.model == ModelKind::kMultiTask) m.csqa = resolve(require("csqa"));
  if (auto s = get("splits")) m.splits = resolve(*s);
  if (auto s = get("seed")) {
    try {
      const long long v = parse_int(*s);
      if (v < 0) throw ParseError(0, "negative");
      m.seed = static_cast<std::uint64_t>(v);
    } catch (const ParseError&) {
      throw ValidationError("seed", "seed must be a non-negative integer");
    }
  }
  const fs::path out(require("output"));
  m.output = out.is_absolute() ? out : output_root / out;

  if (auto c = get("config")) m.hyperparameters = load_settings(resolve(*c));
  for (const auto& [key, value] : settings) {
    if (key.find('.') != std::string::npos) {
      m.hyperparameters[key] = value;
    } else if (!known.count(key)) {
      throw ValidationError(key, "unknown manifest key '" + key + "'");
    }
  }
  resolve_hyperparameters(m.hyperparameters);
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  const Settings settings = load_settings(path);
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  const char* root = std::getenv("MTNEWS_OUTPUT_ROOT");
  return parse_manifest(settings, base, root && *root ? fs::path(root) : base);
}

std::vector<FoldPlan> run_split(const ExperimentManifest& m) {
  const Hyperparameters hp = resolve_hyperparameters(m.hyperparameters);
  const Datasets d = load_datasets(m);
  auto plans = m.splits ? load_fold_plans(*m.splits) : build_folds(m, hp, d);
  fs::create_directories(m.output);
  save_fold_plans(folds_path(m), plans);
  return plans;
}

std::vector<LossHistory> run_train(const ExperimentManifest& m) {
  const Hyperparameters hp = resolve_hyperparameters(m.hyperparameters);
  const Datasets d = load_datasets(m);
  const auto plans = folds_for(m, hp, d);
  std::vector<LossHistory> histories;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const fs::path dir = fold_dir(m, k);
    fs::create_directories(dir);
    const auto train = fold_side(m, d, plans[k].train_ids);
    if (train.empty()) throw ValidationError("splits", "fold " + std::to_string(k) + " has no training samples");
    if (is_transformer(m.model)) {
      histories.push_back(train_transformer_fold(m, hp, d, train, k, dir));
    } else {
      train_baseline_fold(m, hp, train, k, dir);
    }
  }
  return histories;
}

ExperimentReport run_evaluate(const ExperimentManifest& m, const std::optional<fs::path>& compare_with) {
  const Datasets d = load_datasets(m);
  if (!fs::exists(folds_path(m)) && !m.splits) {
    throw ValidationError("checkpoint", "no trained run in " + m.output.string());
  }
  const auto plans = load_fold_plans(m.splits ? *m.splits : folds_path(m));
  const auto labels = class_labels(m);
  std::vector<ConfusionMatrix> confusions;
  std::vector<DatedPrediction> dated;
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const fs::path dir = fold_dir(m, k);
    const auto test = fold_side(m, d, plans[k].test_ids);
    const auto predicted = is_transformer(m.model) ? predict_transformer_fold(m, test, dir)
                                                   : predict_baseline_fold(m, test, dir);
    std::vector<std::string> truth, pred;
    for (std::size_t i = 0; i < test.size(); ++i) {
      truth.push_back(labels[test[i].label]);
      pred.push_back(labels[predicted[i]]);
      if (test[i].article && m.protocol == ExperimentProtocol::kForecasting) {
        dated.push_back({test[i].article->published, truth.back(), pred.back()});
      }
    }
    write_with(dir / "predictions.csv", [&](std::ostream& o) {
      o << "id,truth,predicted\n";
      for (std::size_t i = 0; i < test.size(); ++i) o << test[i].id << ',' << truth[i] << ',' << pred[i] << '\n';
    });
    confusions.push_back(confusion_matrix(truth, pred, labels));
    write_file(dir / "confusion.csv", render_confusion_csv(confusions.back()));
  }

  ExperimentReport report = make_report(feature_display(m.feature), std::string(display_name(m.model)),
                                        confusions, display_labels(m));
  if (m.protocol == ExperimentProtocol::kForecasting) {
    report.monthly = monthly_macro_f1(dated, labels);
    write_file(m.output / "monthly.csv", render_monthly_csv(*report.monthly));
  }
  std::vector<double> fold_scores;
  for (const auto& cm : confusions) fold_scores.push_back(macro_f1(per_class_f1(cm)));
  write_with(m.output / "fold_scores.csv", [&](std::ostream& o) {
    o << "fold,macro_f1\n";
    for (std::size_t k = 0; k < fold_scores.size(); ++k) o << k << ',' << format_double(fold_scores[k]) << '\n';
  });
  if (compare_with) {
    const auto baseline_scores = read_fold_scores(*compare_with);
    if (baseline_scores.size() != fold_scores.size()) {
      throw ValidationError("compare", "fold counts differ: " + std::to_string(baseline_scores.size()) + " vs " +
                                           std::to_string(fold_scores.size()));
    }
    const ExperimentReport baseline = load_summary(*compare_with);
    report.significance = compare_folds(baseline.model, baseline_scores, report.model, fold_scores);
  }
  write_file(m.output / "confusion.csv", render_confusion_csv(report.confusion));
  write_file(m.output / "report.csv", render_report(report, ReportFormat::kCsv));
  write_file(m.output / "report.md", render_report(report, ReportFormat::kMarkdown));
  write_file(m.output / "summary.json", report_to_json(report).dump(2) + "\n");
  return report;
}

ExperimentReport run_experiment(const ExperimentManifest& m, const std::optional<fs::path>& compare_with) {
  run_split(m);
  run_train(m);
  return run_evaluate(m, compare_with);
}

ExperimentReport load_summary(const fs::path& run_dir) {
  auto in = open_for_reading(run_dir / "summary.json");
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ValidationError("summary", (run_dir / "summary.json").string() + ": " + e.what());
  }
}

CorpusStats run_ingest(const std::vector<fs::path>& inputs, const fs::path& out_dir, const IngestOptions& options) {
  std::vector<NewsArticle> articles;
  std::set<std::string> ids;
  for (const auto& path : inputs) {
    for (auto& a : load_articles(path)) {
      if (!ids.insert(a.id).second) throw ValidationError("id", "duplicate article id '" + a.id + "' in " + path.string());
      a.title = clean_text(a.title);
      a.body = clean_text(a.body);
      articles.push_back(std::move(a));
    }
  }
  auto kept = prune_sources(articles, options.min_per_source, options.cap_per_source, options.seed);
  kept = filter_length_outliers(kept, options.length_filter);
  fs::create_directories(out_dir);
  save_articles(out_dir / "articles.jsonl", kept);
  const CorpusStats stats = corpus_stats(kept);
  write_file(out_dir / "stats.csv", render_stats_csv(stats));
  return stats;
}

}  // namespace mtnews
