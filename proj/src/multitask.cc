#include "mtnews/multitask.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace mtnews {
namespace {

RowVector softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  RowVector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

std::size_t argmax_lowest(const RowVector& v) {
  std::size_t best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(i);
  }
  return best;
}

// Classification: one logit per label. Multiple choice: one score per input.
RowVector head_logits(const ModelBundle& bundle, const TaskHead& head, const TaskExample& ex) {
  if (head.spec.kind == TaskKind::kClassification) {
    if (ex.inputs.size() != 1) throw DomainError("classification example needs exactly one input");
    const EncoderOutput out = forward(ex.inputs[0], bundle.encoder, bundle.config);
    return out.pooled * head.weight.value + head.bias.value.row(0);
  }
  RowVector scores(static_cast<Eigen::Index>(ex.inputs.size()));
  for (std::size_t c = 0; c < ex.inputs.size(); ++c) {
    const EncoderOutput out = forward(ex.inputs[c], bundle.encoder, bundle.config);
    scores(static_cast<Eigen::Index>(c)) = (out.pooled * head.weight.value)(0) + head.bias.value(0, 0);
  }
  return scores;
}

std::size_t label_index(const TaskSpec& task, std::string_view label) {
  for (std::size_t i = 0; i < task.labels.size(); ++i) {
    if (task.labels[i] == label) return i;
  }
  throw ValidationError("label", "label '" + std::string(label) + "' is not part of task " + task.name);
}

const std::string& field_text(const TaskRecord& record, InputField field) {
  if (const auto* a = std::get_if<NewsArticle>(&record)) {
    if (field == InputField::kTitle) return a->title;
    if (field == InputField::kBody) return a->body;
  } else if (const auto* c = std::get_if<ClaimStatement>(&record)) {
    if (field == InputField::kText) return c->text;
  } else if (const auto* q = std::get_if<CSQAItem>(&record)) {
    if (field == InputField::kQuestion) return q->question;
  }
  throw ValidationError(std::string(to_string(field)),
                        "record has no field '" + std::string(to_string(field)) + "'");
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ',';
    s += labels[i];
  }
  return s;
}

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = s.find(',', start);
    out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(TaskKind k) {
  return k == TaskKind::kClassification ? "classification" : "multiple_choice";
}

std::string_view to_string(InputField f) {
  switch (f) {
    case InputField::kTitle: return "title";
    case InputField::kBody: return "body";
    case InputField::kText: return "text";
    case InputField::kQuestion: return "question";
    case InputField::kChoice: return "choice";
  }
  return "";
}

std::optional<InputField> parse_input_field(std::string_view s) {
  for (InputField f : {InputField::kTitle, InputField::kBody, InputField::kText,
                       InputField::kQuestion, InputField::kChoice}) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

InputRecipe news_recipe(std::string_view feature, std::size_t max_title, std::size_t max_body) {
  if (feature == "title") return {InputField::kTitle, std::nullopt, max_title, max_body};
  if (feature == "body") return {InputField::kBody, std::nullopt, max_body, max_body};
  if (feature == "merged") return {InputField::kTitle, InputField::kBody, max_title, max_body};
  throw DomainError("unknown news feature '" + std::string(feature) + "'");
}

TaskSpec news_task(std::string name, std::string_view feature) {
  TaskSpec t;
  t.name = std::move(name);
  t.kind = TaskKind::kClassification;
  for (SourceType s : kAllSourceTypes) t.labels.emplace_back(to_string(s));
  t.recipe = news_recipe(feature);
  return t;
}

TaskSpec claim_task(std::string name) {
  TaskSpec t;
  t.name = std::move(name);
  t.kind = TaskKind::kClassification;
  for (ClaimLabel l : kAllClaimLabels) t.labels.emplace_back(to_string(l));
  t.recipe = {InputField::kText, std::nullopt, 128, 128};
  return t;
}

TaskSpec csqa_task(std::string name) {
  TaskSpec t;
  t.name = std::move(name);
  t.kind = TaskKind::kMultipleChoice;
  t.recipe = {InputField::kQuestion, InputField::kChoice, 128, 128};
  return t;
}

const TaskHead& ModelBundle::head(const std::string& task) const {
  for (const TaskHead& h : heads) {
    if (h.spec.name == task) return h;
  }
  throw DomainError("unknown task '" + task + "'");
}

TaskHead& ModelBundle::head(const std::string& task) {
  return const_cast<TaskHead&>(static_cast<const ModelBundle&>(*this).head(task));
}

bool ModelBundle::has_task(const std::string& task) const {
  return std::any_of(heads.begin(), heads.end(), [&](const TaskHead& h) { return h.spec.name == task; });
}

void ModelBundle::save(std::ostream& out) const {
  out << "model_bundle tasks=" << heads.size() << '\n';
  for (const TaskHead& h : heads) {
    const InputRecipe& r = h.spec.recipe;
    out << "task name=" << h.spec.name << " kind=" << to_string(h.spec.kind)
        << " segment_a=" << to_string(r.segment_a)
        << " segment_b=" << (r.segment_b ? to_string(*r.segment_b) : std::string_view("none"))
        << " max_a=" << r.max_a << " max_b=" << r.max_b << " labels=" << join_labels(h.spec.labels)
        << '\n';
  }
  save_encoder(out, config, encoder);
  for (const TaskHead& h : heads) {
    write_matrix_block(out, h.weight.name, h.weight.value);
    write_matrix_block(out, h.bias.name, h.bias.value);
  }
}

ModelBundle ModelBundle::load(std::istream& in, Vocabulary vocab) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "empty model checkpoint");
  auto fields = split_whitespace(line);
  if (fields.size() != 2 || fields[0] != "model_bundle" || fields[1].rfind("tasks=", 0) != 0) {
    throw ParseError(0, "expected model_bundle header, got '" + line + "'");
  }
  const auto n_tasks = static_cast<std::size_t>(parse_int(fields[1].substr(6)));
  std::vector<TaskSpec> specs;
  for (std::size_t i = 0; i < n_tasks; ++i) {
    if (!std::getline(in, line)) throw ParseError(0, "model checkpoint truncated in task list");
    fields = split_whitespace(line);
    if (fields.empty() || fields[0] != "task") throw ParseError(0, "expected task line, got '" + line + "'");
    TaskSpec spec;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const auto eq = fields[f].find('=');
      if (eq == std::string::npos) throw ParseError(0, "bad task field " + fields[f]);
      const std::string key = fields[f].substr(0, eq);
      const std::string value = fields[f].substr(eq + 1);
      if (key == "name") {
        spec.name = value;
      } else if (key == "kind") {
        if (value == "classification") spec.kind = TaskKind::kClassification;
        else if (value == "multiple_choice") spec.kind = TaskKind::kMultipleChoice;
        else throw ParseError(0, "unknown task kind " + value);
      } else if (key == "segment_a" || key == "segment_b") {
        if (key == "segment_b" && value == "none") {
          spec.recipe.segment_b.reset();
          continue;
        }
        auto field = parse_input_field(value);
        if (!field) throw ParseError(0, "unknown input field " + value);
        if (key == "segment_a") spec.recipe.segment_a = *field;
        else spec.recipe.segment_b = *field;
      } else if (key == "max_a") {
        spec.recipe.max_a = static_cast<std::size_t>(parse_int(value));
      } else if (key == "max_b") {
        spec.recipe.max_b = static_cast<std::size_t>(parse_int(value));
      } else if (key == "labels") {
        spec.labels = split_labels(value);
      } else {
        throw ParseError(0, "unknown task field " + key);
      }
    }
    specs.push_back(std::move(spec));
  }
  auto [config, params] = load_encoder(in);
  ModelBundle bundle;
  bundle.config = config;
  bundle.encoder = std::move(params);
  bundle.vocab = std::move(vocab);
  if (bundle.vocab.size() > config.vocab_size) {
    throw ParseError(0, "vocabulary is larger than the encoder's vocab_size");
  }
  for (TaskSpec& spec : specs) {
    register_task(bundle, spec, 0, 0.0);
    TaskHead& h = bundle.heads.back();
    Matrix w = read_matrix_block(in, h.weight.name);
    Matrix b = read_matrix_block(in, h.bias.name);
    if (w.rows() != h.weight.value.rows() || w.cols() != h.weight.value.cols() ||
        b.rows() != h.bias.value.rows() || b.cols() != h.bias.value.cols()) {
      throw ParseError(0, "head '" + spec.name + "' has the wrong shape");
    }
    h.weight.value = std::move(w);
    h.bias.value = std::move(b);
  }
  return bundle;
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "model.ckpt", std::ios::binary);
  if (!out) throw ParseError(0, "cannot write " + (dir / "model.ckpt").string());
  save(out);
  vocab.save(dir / "vocab.tsv");
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir) {
  Vocabulary vocab = Vocabulary::load(dir / "vocab.tsv");
  std::ifstream in(dir / "model.ckpt");
  if (!in) throw ParseError(0, "cannot open " + (dir / "model.ckpt").string());
  return load(in, std::move(vocab));
}

ModelBundle make_bundle(const EncoderConfig& config, Vocabulary vocab, std::uint64_t seed) {
  config.validate();
  if (vocab.size() > config.vocab_size) {
    throw DomainError("make_bundle: vocabulary has " + std::to_string(vocab.size()) +
                      " tokens but vocab_size is " + std::to_string(config.vocab_size));
  }
  ModelBundle b;
  b.config = config;
  b.encoder = init_encoder_params(config, seed);
  b.vocab = std::move(vocab);
  return b;
}

void register_task(ModelBundle& bundle, const TaskSpec& task, std::uint64_t seed,
                   std::optional<double> init_std) {
  if (task.name.empty()) throw DomainError("register_task: empty task name");
  if (bundle.has_task(task.name)) throw DomainError("register_task: duplicate task '" + task.name + "'");
  if (task.kind == TaskKind::kClassification && task.labels.empty()) {
    throw DomainError("register_task: classification task '" + task.name + "' has no labels");
  }
  const std::size_t longest =
      1 + task.recipe.max_a + 1 + (task.recipe.segment_b ? task.recipe.max_b + 1 : 0);
  if (longest > bundle.config.max_positions) {
    throw DomainError("register_task: recipe of '" + task.name + "' encodes up to " +
                      std::to_string(longest) + " positions, encoder allows " +
                      std::to_string(bundle.config.max_positions));
  }
  const auto d = static_cast<Eigen::Index>(bundle.config.d_model);
  const auto out_dim = task.kind == TaskKind::kClassification
                           ? static_cast<Eigen::Index>(task.labels.size())
                           : Eigen::Index{1};
  TaskHead h;
  h.spec = task;
  h.weight = Tensor("head." + task.name + ".weight", d, out_dim);
  h.bias = Tensor("head." + task.name + ".bias", 1, out_dim);
  const double stddev = init_std.value_or(bundle.config.init_std);
  if (stddev > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < h.weight.value.size(); ++i) h.weight.value.data()[i] = rng.normal(0.0, stddev);
  }
  bundle.heads.push_back(std::move(h));
}

TaskExample encode_example(const TaskSpec& task, const TaskRecord& record, const Vocabulary& vocab) {
  const InputRecipe& r = task.recipe;
  TaskExample ex;
  if (task.kind == TaskKind::kMultipleChoice) {
    const auto* item = std::get_if<CSQAItem>(&record);
    if (!item) throw ValidationError("choices", "task " + task.name + " expects a multiple-choice item");
    if (item->choices.size() < 2) throw DomainError("multiple-choice item needs at least two choices");
    const std::string& question = field_text(record, r.segment_a);
    for (const std::string& choice : item->choices) {
      ex.inputs.push_back(encode_pair(question, choice, r.max_a, r.max_b, vocab));
    }
    ex.target = item->answer_index;
    return ex;
  }
  const std::string& a = field_text(record, r.segment_a);
  std::optional<std::string> b;
  if (r.segment_b) b = field_text(record, *r.segment_b);
  ex.inputs.push_back(encode_pair(a, b, r.max_a, r.max_b, vocab));
  if (const auto* article = std::get_if<NewsArticle>(&record)) {
    ex.target = label_index(task, to_string(article->source_type));
  } else if (const auto* claim = std::get_if<ClaimStatement>(&record)) {
    ex.target = label_index(task, to_string(claim->label));
  }
  return ex;
}

std::vector<ScheduledBatch> build_schedule(
    const std::vector<std::pair<std::string, std::size_t>>& batches_per_task, std::uint64_t seed) {
  std::vector<ScheduledBatch> schedule;
  for (const auto& [task, count] : batches_per_task) {
    if (count == 0) throw DomainError("build_schedule: task '" + task + "' has no samples");
    for (std::size_t b = 0; b < count; ++b) schedule.push_back({task, b});
  }
  Rng rng(seed);
  rng.shuffle(schedule);
  return schedule;
}

double example_loss(ModelBundle& bundle, TaskHead& head, const TaskExample& example,
                    bool with_grad, double grad_scale, Rng* dropout_rng) {
  if (head.spec.kind == TaskKind::kClassification) {
    if (example.inputs.size() != 1) throw DomainError("classification example needs exactly one input");
    ForwardCache cache;
    const EncoderOutput out = forward(example.inputs[0], bundle.encoder, bundle.config,
                                      with_grad ? &cache : nullptr, dropout_rng);
    const RowVector logits = out.pooled * head.weight.value + head.bias.value.row(0);
    RowVector probs = softmax(logits);
    const auto target = static_cast<Eigen::Index>(example.target);
    const double loss = -std::log(std::max(probs(target), 1e-300));
    if (with_grad) {
      probs(target) -= 1.0;
      probs *= grad_scale;
      head.weight.grad.noalias() += out.pooled.transpose() * probs;
      head.bias.grad.row(0) += probs;
      const RowVector d_pooled = probs * head.weight.value.transpose();
      backward(example.inputs[0], bundle.encoder, bundle.config, cache, out,
               Matrix::Zero(out.states.rows(), out.states.cols()), d_pooled);
    }
    return loss;
  }

  const std::size_t k = example.inputs.size();
  if (k < 2) throw DomainError("multiple-choice example needs at least two choices");
  std::vector<ForwardCache> caches(with_grad ? k : 0);
  std::vector<EncoderOutput> outs;
  outs.reserve(k);
  RowVector scores(static_cast<Eigen::Index>(k));
  for (std::size_t c = 0; c < k; ++c) {
    outs.push_back(forward(example.inputs[c], bundle.encoder, bundle.config,
                           with_grad ? &caches[c] : nullptr, dropout_rng));
    scores(static_cast<Eigen::Index>(c)) = (outs[c].pooled * head.weight.value)(0) + head.bias.value(0, 0);
  }
  RowVector probs = softmax(scores);
  const auto target = static_cast<Eigen::Index>(example.target);
  const double loss = -std::log(std::max(probs(target), 1e-300));
  if (with_grad) {
    probs(target) -= 1.0;
    probs *= grad_scale;
    for (std::size_t c = 0; c < k; ++c) {
      const double ds = probs(static_cast<Eigen::Index>(c));
      head.weight.grad.noalias() += ds * outs[c].pooled.transpose();
      head.bias.grad(0, 0) += ds;
      const RowVector d_pooled = ds * head.weight.value.col(0).transpose();
      backward(example.inputs[c], bundle.encoder, bundle.config, caches[c], outs[c],
               Matrix::Zero(outs[c].states.rows(), outs[c].states.cols()), d_pooled);
    }
  }
  return loss;
}

MultiTaskTrainer::MultiTaskTrainer(ModelBundle& bundle, const TrainConfig& config)
    : bundle_(bundle),
      config_(config),
      optimizer_(SgdConfig{config.learning_rate, config.momentum, config.clip_norm}),
      dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  if (config.batch_size == 0) throw DomainError("train config: batch_size must be >= 1");
  if (!(config.learning_rate > 0.0)) throw DomainError("train config: learning_rate must be > 0");
}

double MultiTaskTrainer::train_step(const std::string& task, std::span<const TaskExample> batch) {
  if (batch.empty()) throw DomainError("train_step: empty batch");
  TaskHead& head = bundle_.head(task);
  std::vector<Tensor*> tensors = bundle_.encoder.tensors();
  tensors.push_back(&head.weight);
  tensors.push_back(&head.bias);
  for (Tensor* t : tensors) t->zero_grad();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const TaskExample& ex : batch) {
    loss += example_loss(bundle_, head, ex, true, inv_b, &dropout_rng_) * inv_b;
  }
  if (!std::isfinite(loss)) {
    throw TrainingError("train_step: non-finite loss on task '" + task + "' (gradient norm " +
                        format_double(global_grad_norm(tensors)) + ")");
  }
  optimizer_.step(tensors);
  return loss;
}

LossHistory fit(ModelBundle& bundle, const std::vector<TaskData>& tasks, const TrainConfig& config) {
  for (const TaskData& t : tasks) {
    bundle.head(t.task);
    if (t.examples.empty()) throw DomainError("fit: task '" + t.task + "' has no samples");
  }
  MultiTaskTrainer trainer(bundle, config);
  LossHistory history;
  for (const TaskData& t : tasks) history[t.task];

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = config.seed + static_cast<std::uint64_t>(epoch);
    Rng rng(epoch_seed);
    // Per task: shuffled example order, chunked into batches.
    std::map<std::string, std::vector<std::vector<std::size_t>>> batches;
    std::vector<std::pair<std::string, std::size_t>> counts;
    for (const TaskData& t : tasks) {
      std::vector<std::size_t> order(t.examples.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(order);
      auto& chunks = batches[t.task];
      for (std::size_t s = 0; s < order.size(); s += config.batch_size) {
        chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                            order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + config.batch_size)));
      }
      counts.emplace_back(t.task, chunks.size());
    }
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const ScheduledBatch& sb : build_schedule(counts, epoch_seed)) {
      const TaskData& data = *std::find_if(tasks.begin(), tasks.end(),
                                           [&](const TaskData& t) { return t.task == sb.task; });
      std::vector<TaskExample> batch;
      for (std::size_t i : batches[sb.task][sb.batch_index]) batch.push_back(data.examples[i]);
      const double loss = trainer.train_step(sb.task, batch);
      auto& s = sums[sb.task];
      s.first += loss;
      ++s.second;
    }
    for (const auto& [task, s] : sums) history[task].push_back(s.first / static_cast<double>(s.second));
  }
  return history;
}

ClassPrediction predict_class(const ModelBundle& bundle, const std::string& task,
                              const TaskRecord& record) {
  const TaskHead& head = bundle.head(task);
  return predict_class(bundle, task, encode_example(head.spec, record, bundle.vocab));
}

ClassPrediction predict_class(const ModelBundle& bundle, const std::string& task,
                              const TaskExample& example) {
  const TaskHead& head = bundle.head(task);
  if (head.spec.kind != TaskKind::kClassification) {
    throw DomainError("predict_class: task '" + task + "' is not a classification task");
  }
  ClassPrediction p;
  p.probabilities = softmax(head_logits(bundle, head, example));
  p.label = argmax_lowest(p.probabilities);
  return p;
}

RowVector score_choices(const ModelBundle& bundle, const CSQAItem& item, const std::string& task) {
  if (item.choices.size() < 2) throw DomainError("score_choices: need at least two choices");
  const TaskHead* head = nullptr;
  if (task.empty()) {
    for (const TaskHead& h : bundle.heads) {
      if (h.spec.kind == TaskKind::kMultipleChoice) {
        head = &h;
        break;
      }
    }
    if (!head) throw DomainError("score_choices: bundle has no multiple-choice task");
  } else {
    head = &bundle.head(task);
  }
  return score_choices(bundle, head->spec.name, encode_example(head->spec, item, bundle.vocab));
}

RowVector score_choices(const ModelBundle& bundle, const std::string& task, const TaskExample& example) {
  const TaskHead& head = bundle.head(task);
  if (head.spec.kind != TaskKind::kMultipleChoice) {
    throw DomainError("score_choices: task '" + task + "' is not a multiple-choice task");
  }
  if (example.inputs.size() < 2) throw DomainError("score_choices: need at least two choices");
  return softmax(head_logits(bundle, head, example));
}

}  // namespace mtnews
