#include "mtnews/synthetic.h"

#include <array>
#include <string>

#include "mtnews/common.h"

namespace mtnews {
namespace {

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "the",    "report", "said",   "today",  "people", "city",    "state",  "week",
      "new",    "after",  "over",   "public", "office", "plan",    "group",  "local",
      "year",   "time",   "member", "issue",  "story",  "country", "during", "while"};
  return words;
}

const std::array<std::vector<std::string>, 6>& cue_words() {
  static const std::array<std::vector<std::string>, 6> cues = {{
      {"parody", "spoof", "hilarious", "onion", "absurd", "joke"},
      {"coverup", "chemtrails", "illuminati", "hoax", "hidden", "truthers"},
      {"glorious", "motherland", "enemy", "regime", "patriots", "destiny"},
      {"according", "officials", "data", "statement", "confirmed", "analysis"},
      {"progressive", "equality", "climate", "union", "diversity", "activists"},
      {"conservative", "liberty", "border", "taxpayers", "freedom", "tradition"},
  }};
  return cues;
}

template <std::size_t N>
std::string sentence(Rng& rng, const std::array<std::vector<std::string>, N>& all_cues, std::size_t own,
                     std::size_t length, double cue_rate, double crosstalk = 0.0) {
  const auto& filler = filler_words();
  std::string out;
  // At least one cue word per sentence keeps every class identifiable.
  const std::size_t forced = rng.uniform_int(length);
  for (std::size_t i = 0; i < length; ++i) {
    const bool cue = i == forced || rng.uniform() < cue_rate;
    std::size_t from = own;
    if (cue && crosstalk > 0.0 && rng.uniform() < crosstalk) from = rng.uniform_int(N);
    const auto& cues = all_cues[from];
    const std::string& w = cue ? cues[rng.uniform_int(cues.size())] : filler[rng.uniform_int(filler.size())];
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

std::vector<NewsArticle> synthetic_news(const SyntheticNewsOptions& options) {
  if (options.sources_per_type == 0 || options.title_tokens == 0 || options.body_tokens == 0) {
    throw DomainError("synthetic_news: sources and lengths must be positive");
  }
  if (options.last_year < options.first_year) throw DomainError("synthetic_news: empty year range");
  Rng rng(options.seed);
  const int years = options.last_year - options.first_year + 1;
  std::vector<NewsArticle> out;
  out.reserve(options.articles);
  for (std::size_t i = 0; i < options.articles; ++i) {
    const auto type_index = i % kAllSourceTypes.size();
    const SourceType type = kAllSourceTypes[type_index];
    NewsArticle a;
    a.id = "syn" + std::to_string(i);
    a.source_type = type;
    a.source = std::string(to_string(type)) + "-" +
               std::to_string(rng.uniform_int(options.sources_per_type)) + ".example";
    a.title = sentence(rng, cue_words(), type_index, options.title_tokens, options.cue_rate, options.crosstalk);
    a.body = sentence(rng, cue_words(), type_index, options.body_tokens, options.cue_rate, options.crosstalk);
    a.published = Date{options.first_year + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(years))),
                       1 + static_cast<int>(rng.uniform_int(12)), 1 + static_cast<int>(rng.uniform_int(28))};
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<CSQAItem> synthetic_csqa(std::size_t items, std::size_t choices, std::uint64_t seed) {
  if (choices < 2) throw DomainError("synthetic_csqa: need at least two choices");
  static const std::vector<std::string> answers = {"water", "bread", "sleep", "music", "garden", "friend"};
  static const std::vector<std::string> distractors = {"rock", "dust", "noise", "void", "ash", "rust",
                                                      "smoke", "static"};
  static const std::vector<std::string> stems = {"what", "do", "people", "need", "when", "they",
                                                "feel", "tired", "hungry", "where", "find", "would"};
  Rng rng(seed);
  std::vector<CSQAItem> out;
  out.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    CSQAItem item;
    for (int w = 0; w < 6; ++w) {
      if (w) item.question += ' ';
      item.question += stems[rng.uniform_int(stems.size())];
    }
    item.answer_index = rng.uniform_int(choices);
    for (std::size_t c = 0; c < choices; ++c) {
      const auto& pool = c == item.answer_index ? answers : distractors;
      item.choices.push_back(pool[rng.uniform_int(pool.size())] + " " + filler_words()[rng.uniform_int(8)]);
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<ClaimStatement> synthetic_claims(std::size_t statements, std::size_t train,
                                             std::uint64_t seed) {
  static const std::array<std::vector<std::string>, 3> cues = {{
      {"thank", "you", "wonderful", "great", "hello", "honored"},
      {"we", "talked", "yesterday", "met", "visited", "went"},
      {"percent", "million", "billion", "tax", "jobs", "increased"},
  }};
  Rng rng(seed);
  std::vector<ClaimStatement> out;
  out.reserve(statements);
  for (std::size_t i = 0; i < statements; ++i) {
    ClaimStatement s;
    const auto label_index = i % cues.size();
    s.label = kAllClaimLabels[label_index];
    s.text = sentence(rng, cues, label_index, 10, 0.3);
    s.split = i < train ? DataSplit::kTrain : DataSplit::kTest;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mtnews
