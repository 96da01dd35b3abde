#ifndef MTNEWS_SPLITS_H_
#define MTNEWS_SPLITS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mtnews/corpus.h"

namespace mtnews {

enum class Protocol { kForecasting, kUnseenSource };
std::string_view to_string(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);

// A train/test partition of article ids. Ids keep corpus order.
struct FoldPlan {
  Protocol protocol = Protocol::kForecasting;
  int fold_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;

  bool operator==(const FoldPlan&) const = default;
};

struct ForecastingOptions {
  int window_start_year = 2015;
  int cutoff_year = 2019;
};

// Train on [window_start_year, cutoff_year), test on cutoff_year, keeping
// only sources active inside the window. Throws ProtocolError when either
// side ends up empty.
FoldPlan forecasting_split(const std::vector<NewsArticle>& articles,
                           const ForecastingOptions& options = {});

// Month (1..12) -> ids of the test articles published in that month. All
// twelve months are present. Throws DomainError for an article outside
// `year`.
std::map<int, std::vector<std::string>> monthly_buckets(const std::vector<NewsArticle>& test,
                                                        int year);

struct UnseenSourceOptions {
  double train_fraction = 0.9;
  int repeats = 5;
  std::uint64_t seed = 0;
};

// Per source type, floor(train_fraction * S) sources (clamped to
// [1, S - 1]) go to train and the rest to test; all articles follow their
// source. Repeat r shuffles with seed ^ r. Throws ProtocolError naming the
// type when a type has fewer than two sources.
std::vector<FoldPlan> unseen_source_folds(const std::vector<NewsArticle>& articles,
                                          const UnseenSourceOptions& options);

// Number of training sources for a type with `sources` publishers.
std::size_t train_source_count(std::size_t sources, double train_fraction);

void write_fold_plans(std::ostream& out, const std::vector<FoldPlan>& plans);
std::vector<FoldPlan> read_fold_plans(std::istream& in);
void save_fold_plans(const std::filesystem::path& path, const std::vector<FoldPlan>& plans);
std::vector<FoldPlan> load_fold_plans(const std::filesystem::path& path);

}  // namespace mtnews

#endif  // MTNEWS_SPLITS_H_
