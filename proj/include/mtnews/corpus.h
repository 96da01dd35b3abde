#ifndef MTNEWS_CORPUS_H_
#define MTNEWS_CORPUS_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtnews {

// Publisher-level false news taxonomy. Enumerator order is the column order
// used in reports.
enum class SourceType { kSatire, kConspiracy, kPropaganda, kNeutral, kBiasLeft, kBiasRight };

inline constexpr std::array<SourceType, 6> kAllSourceTypes = {
    SourceType::kSatire,  SourceType::kConspiracy, SourceType::kPropaganda,
    SourceType::kNeutral, SourceType::kBiasLeft,   SourceType::kBiasRight};

// "satire", "conspiracy", ..., "bias_left", "bias_right".
std::string_view to_string(SourceType t);
std::optional<SourceType> parse_source_type(std::string_view s);
// Human-readable column header, e.g. "Bias-Left".
std::string_view display_name(SourceType t);

enum class ClaimLabel { kNFS, kUFS, kCFS };
inline constexpr std::array<ClaimLabel, 3> kAllClaimLabels = {
    ClaimLabel::kNFS, ClaimLabel::kUFS, ClaimLabel::kCFS};
std::string_view to_string(ClaimLabel l);
std::optional<ClaimLabel> parse_claim_label(std::string_view s);

enum class DataSplit { kTrain, kTest };
std::string_view to_string(DataSplit s);
std::optional<DataSplit> parse_data_split(std::string_view s);

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  // Strict "YYYY-MM-DD".
  static std::optional<Date> parse(std::string_view s);
  std::string to_string() const;
  auto operator<=>(const Date&) const = default;
};

struct NewsArticle {
  std::string id;
  std::string title;
  std::string body;
  std::string source;
  SourceType source_type = SourceType::kNeutral;
  Date published;
  std::optional<std::string> subreddit;

  bool operator==(const NewsArticle&) const = default;
};

struct ClaimStatement {
  std::string text;
  ClaimLabel label = ClaimLabel::kNFS;
  DataSplit split = DataSplit::kTrain;
  // Optional per-sentence annotation features (POS/NER/sentiment counts)
  // produced upstream; consumed by the claim feature baseline.
  std::vector<double> annotations;

  bool operator==(const ClaimStatement&) const = default;
};

struct CSQAItem {
  std::string question;
  std::vector<std::string> choices;
  std::size_t answer_index = 0;

  bool operator==(const CSQAItem&) const = default;
};

struct TypeStats {
  std::size_t articles = 0;
  std::size_t sources = 0;
  // Absent when the type has no articles.
  std::optional<double> mean_body_tokens;
  std::optional<double> mean_title_tokens;
};

struct CorpusStats {
  std::map<SourceType, TypeStats> per_type;  // always holds all six types
};

// Whitespace token count of the cleaned text.
std::size_t token_count(std::string_view text);

// Drops sources with fewer than `min_per_source` articles and uniformly
// down-samples sources above `cap_per_source` to exactly the cap. The
// relative order of kept articles is preserved.
std::vector<NewsArticle> prune_sources(const std::vector<NewsArticle>& articles,
                                       std::size_t min_per_source,
                                       std::size_t cap_per_source, std::uint64_t seed);

struct LengthFilterOptions {
  std::size_t k = 20;
  double threshold = 1.5;
};

// Per source type, removes articles whose body length is a local outlier.
// Groups with fewer than two articles pass through; a group is never emptied.
std::vector<NewsArticle> filter_length_outliers(const std::vector<NewsArticle>& articles,
                                                const LengthFilterOptions& options = {});

CorpusStats corpus_stats(const std::vector<NewsArticle>& articles);

// CSV: type,articles,sources,mean_body_tokens,mean_title_tokens
std::string render_stats_csv(const CorpusStats& stats);

}  // namespace mtnews

#endif  // MTNEWS_CORPUS_H_
