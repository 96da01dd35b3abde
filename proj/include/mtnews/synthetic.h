#ifndef MTNEWS_SYNTHETIC_H_
#define MTNEWS_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "mtnews/corpus.h"

namespace mtnews {

// Template-generated news. Every source type has its own cue vocabulary;
// titles and bodies mix cue words with shared filler, so the six classes are
// separable from either field. Sources are named "<type>-<n>.example" and
// articles are spread over [first_year, last_year].
struct SyntheticNewsOptions {
  std::size_t articles = 600;
  std::size_t sources_per_type = 10;
  int first_year = 2015;
  int last_year = 2019;
  std::size_t title_tokens = 8;
  std::size_t body_tokens = 24;
  // Probability that any given word slot holds a cue word (the rest is
  // shared filler).
  double cue_rate = 0.35;
  // Probability that a cue word is drawn from a uniformly chosen type
  // instead of the article's own.
  double crosstalk = 0.0;
  std::uint64_t seed = 0;
};
std::vector<NewsArticle> synthetic_news(const SyntheticNewsOptions& options);

// Multiple-choice items whose correct choice contains a word from a fixed
// "answer" vocabulary while distractors draw from a disjoint pool.
std::vector<CSQAItem> synthetic_csqa(std::size_t items, std::size_t choices, std::uint64_t seed);

// Claim sentences with label-specific cue words; the first `train` go to
// the train split, the rest to test.
std::vector<ClaimStatement> synthetic_claims(std::size_t statements, std::size_t train,
                                             std::uint64_t seed);

}  // namespace mtnews

#endif  // MTNEWS_SYNTHETIC_H_
