#include "mtnews/corpus.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mtnews/common.h"
#include "mtnews/lof.h"
#include "mtnews/text_clean.h"

namespace mtnews {

std::string_view to_string(SourceType t) {
  switch (t) {
    case SourceType::kSatire: return "satire";
    case SourceType::kConspiracy: return "conspiracy";
    case SourceType::kPropaganda: return "propaganda";
    case SourceType::kNeutral: return "neutral";
    case SourceType::kBiasLeft: return "bias_left";
    case SourceType::kBiasRight: return "bias_right";
  }
  return "";
}

std::optional<SourceType> parse_source_type(std::string_view s) {
  for (SourceType t : kAllSourceTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::string_view display_name(SourceType t) {
  switch (t) {
    case SourceType::kSatire: return "Satire";
    case SourceType::kConspiracy: return "Conspiracy";
    case SourceType::kPropaganda: return "Propaganda";
    case SourceType::kNeutral: return "Neutral";
    case SourceType::kBiasLeft: return "Bias-Left";
    case SourceType::kBiasRight: return "Bias-Right";
  }
  return "";
}

std::string_view to_string(ClaimLabel l) {
  switch (l) {
    case ClaimLabel::kNFS: return "NFS";
    case ClaimLabel::kUFS: return "UFS";
    case ClaimLabel::kCFS: return "CFS";
  }
  return "";
}

std::optional<ClaimLabel> parse_claim_label(std::string_view s) {
  for (ClaimLabel l : kAllClaimLabels) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

std::string_view to_string(DataSplit s) { return s == DataSplit::kTrain ? "train" : "test"; }

std::optional<DataSplit> parse_data_split(std::string_view s) {
  if (s == "train") return DataSplit::kTrain;
  if (s == "test") return DataSplit::kTest;
  return std::nullopt;
}

std::optional<Date> Date::parse(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t from, std::size_t len) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = from; i < from + len; ++i) {
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  auto y = digits(0, 4);
  auto m = digits(5, 2);
  auto d = digits(8, 2);
  if (!y || !m || !d || *y < 1 || *m < 1 || *m > 12 || *d < 1) return std::nullopt;
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (*y % 4 == 0 && *y % 100 != 0) || *y % 400 == 0;
  const int max_day = kDays[*m - 1] + ((*m == 2 && leap) ? 1 : 0);
  if (*d > max_day) return std::nullopt;
  return Date{*y, *m, *d};
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::size_t token_count(std::string_view text) { return split_whitespace(text).size(); }

std::vector<NewsArticle> prune_sources(const std::vector<NewsArticle>& articles,
                                       std::size_t min_per_source,
                                       std::size_t cap_per_source, std::uint64_t seed) {
  if (min_per_source < 1) throw DomainError("prune_sources: min_per_source must be >= 1");
  if (cap_per_source < min_per_source) {
    throw DomainError("prune_sources: cap_per_source must be >= min_per_source");
  }
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < articles.size(); ++i) by_source[articles[i].source].push_back(i);

  // Sources are visited in lexicographic order so the draw sequence does not
  // depend on input order.
  Rng rng(seed);
  std::vector<char> keep(articles.size(), 0);
  for (auto& [source, indices] : by_source) {
    if (indices.size() < min_per_source) continue;
    if (indices.size() > cap_per_source) {
      rng.shuffle(indices);
      indices.resize(cap_per_source);
    }
    for (std::size_t i : indices) keep[i] = 1;
  }
  std::vector<NewsArticle> out;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (keep[i]) out.push_back(articles[i]);
  }
  return out;
}

std::vector<NewsArticle> filter_length_outliers(const std::vector<NewsArticle>& articles,
                                                const LengthFilterOptions& options) {
  std::map<SourceType, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    groups[articles[i].source_type].push_back(i);
  }
  std::vector<char> keep(articles.size(), 1);
  for (const auto& [type, indices] : groups) {
    if (indices.size() < 2) continue;
    std::vector<double> lengths;
    lengths.reserve(indices.size());
    for (std::size_t i : indices) {
      lengths.push_back(static_cast<double>(token_count(clean_text(articles[i].body))));
    }
    const std::vector<double> scores = lof_scores(lengths, options.k);
    std::size_t removed = 0;
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (scores[j] > options.threshold) ++removed;
    }
    if (removed == indices.size()) continue;
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (scores[j] > options.threshold) keep[indices[j]] = 0;
    }
  }
  std::vector<NewsArticle> out;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (keep[i]) out.push_back(articles[i]);
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<NewsArticle>& articles) {
  struct Accumulator {
    std::size_t count = 0;
    std::set<std::string> sources;
    double body_tokens = 0.0;
    double title_tokens = 0.0;
  };
  std::map<SourceType, Accumulator> acc;
  for (const NewsArticle& a : articles) {
    Accumulator& g = acc[a.source_type];
    ++g.count;
    g.sources.insert(a.source);
    g.body_tokens += static_cast<double>(token_count(clean_text(a.body)));
    g.title_tokens += static_cast<double>(token_count(clean_text(a.title)));
  }
  CorpusStats stats;
  for (SourceType t : kAllSourceTypes) {
    TypeStats s;
    if (auto it = acc.find(t); it != acc.end() && it->second.count > 0) {
      const double n = static_cast<double>(it->second.count);
      s.articles = it->second.count;
      s.sources = it->second.sources.size();
      s.mean_body_tokens = it->second.body_tokens / n;
      s.mean_title_tokens = it->second.title_tokens / n;
    }
    stats.per_type[t] = s;
  }
  return stats;
}

std::string render_stats_csv(const CorpusStats& stats) {
  std::ostringstream out;
  out << "type,articles,sources,mean_body_tokens,mean_title_tokens\n";
  for (const auto& [type, s] : stats.per_type) {
    out << to_string(type) << ',' << s.articles << ',' << s.sources << ','
        << (s.mean_body_tokens ? format_fixed(*s.mean_body_tokens, 2) : "") << ','
        << (s.mean_title_tokens ? format_fixed(*s.mean_title_tokens, 2) : "") << '\n';
  }
  return out.str();
}

}  // namespace mtnews
