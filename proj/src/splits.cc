#include "mtnews/splits.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "json.hpp"
#include "mtnews/common.h"

namespace mtnews {

std::string_view to_string(Protocol p) {
  return p == Protocol::kForecasting ? "forecasting" : "unseen_source";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "forecasting") return Protocol::kForecasting;
  if (s == "unseen_source") return Protocol::kUnseenSource;
  return std::nullopt;
}

FoldPlan forecasting_split(const std::vector<NewsArticle>& articles,
                           const ForecastingOptions& options) {
  const int start = options.window_start_year;
  const int cutoff = options.cutoff_year;
  std::set<std::string> active;
  for (const NewsArticle& a : articles) {
    const int y = a.published.year;
    if (y >= start && y <= cutoff) active.insert(a.source);
  }
  FoldPlan plan;
  plan.protocol = Protocol::kForecasting;
  for (const NewsArticle& a : articles) {
    if (!active.count(a.source)) continue;
    const int y = a.published.year;
    if (y >= start && y < cutoff) {
      plan.train_ids.push_back(a.id);
    } else if (y == cutoff) {
      plan.test_ids.push_back(a.id);
    }
  }
  if (plan.train_ids.empty()) throw ProtocolError("forecasting split: empty train side");
  if (plan.test_ids.empty()) throw ProtocolError("forecasting split: empty test side");
  return plan;
}

std::map<int, std::vector<std::string>> monthly_buckets(const std::vector<NewsArticle>& test,
                                                        int year) {
  std::map<int, std::vector<std::string>> buckets;
  for (int m = 1; m <= 12; ++m) buckets[m];
  for (const NewsArticle& a : test) {
    if (a.published.year != year) {
      throw DomainError("monthly_buckets: article " + a.id + " dated " +
                        a.published.to_string() + " is outside " + std::to_string(year));
    }
    buckets[a.published.month].push_back(a.id);
  }
  return buckets;
}

std::size_t train_source_count(std::size_t sources, double train_fraction) {
  auto n = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(sources)));
  n = std::max<std::size_t>(n, 1);
  return std::min(n, sources - 1);
}

std::vector<FoldPlan> unseen_source_folds(const std::vector<NewsArticle>& articles,
                                          const UnseenSourceOptions& options) {
  if (options.repeats < 1) throw DomainError("unseen_source_folds: repeats must be >= 1");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw DomainError("unseen_source_folds: train_fraction must be in (0, 1)");
  }
  std::map<SourceType, std::set<std::string>> sources_by_type;
  for (const NewsArticle& a : articles) sources_by_type[a.source_type].insert(a.source);
  for (const auto& [type, sources] : sources_by_type) {
    if (sources.size() < 2) {
      throw ProtocolError("unseen_source_folds: source type '" + std::string(to_string(type)) +
                          "' has fewer than two sources");
    }
  }

  std::vector<FoldPlan> plans;
  for (int r = 0; r < options.repeats; ++r) {
    Rng rng(options.seed ^ static_cast<std::uint64_t>(r));
    std::set<std::string> train_sources;
    for (const auto& [type, sources] : sources_by_type) {
      std::vector<std::string> order(sources.begin(), sources.end());
      rng.shuffle(order);
      const std::size_t n_train = train_source_count(order.size(), options.train_fraction);
      train_sources.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    }
    FoldPlan plan;
    plan.protocol = Protocol::kUnseenSource;
    plan.fold_index = r;
    plan.seed = options.seed;
    for (const NewsArticle& a : articles) {
      (train_sources.count(a.source) ? plan.train_ids : plan.test_ids).push_back(a.id);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

void write_fold_plans(std::ostream& out, const std::vector<FoldPlan>& plans) {
  for (const FoldPlan& p : plans) {
    nlohmann::json obj = nlohmann::json::object();
    obj["protocol"] = std::string(to_string(p.protocol));
    obj["fold_index"] = p.fold_index;
    obj["seed"] = p.seed;
    obj["train_ids"] = p.train_ids;
    obj["test_ids"] = p.test_ids;
    out << obj.dump() << '\n';
  }
}

std::vector<FoldPlan> read_fold_plans(std::istream& in) {
  std::vector<FoldPlan> plans;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(text);
      FoldPlan p;
      auto protocol = parse_protocol(obj.at("protocol").get<std::string>());
      if (!protocol) throw ValidationError("protocol", "unknown protocol");
      p.protocol = *protocol;
      p.fold_index = obj.at("fold_index").get<int>();
      p.seed = obj.at("seed").get<std::uint64_t>();
      p.train_ids = obj.at("train_ids").get<std::vector<std::string>>();
      p.test_ids = obj.at("test_ids").get<std::vector<std::string>>();
      plans.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, "fold plan line " + std::to_string(line) + ": " + e.what());
    }
  }
  return plans;
}

void save_fold_plans(const std::filesystem::path& path, const std::vector<FoldPlan>& plans) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(0, "cannot write " + path.string());
  write_fold_plans(out, plans);
}

std::vector<FoldPlan> load_fold_plans(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return read_fold_plans(in);
}

}  // namespace mtnews
