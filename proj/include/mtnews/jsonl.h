#ifndef MTNEWS_JSONL_H_
#define MTNEWS_JSONL_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtnews/corpus.h"

namespace mtnews {

// JSONL readers. Records come back in file order. A line that is not valid
// JSON raises ParseError carrying its 1-based line number; a schema
// violation raises ValidationError naming the field. Blank lines are
// skipped.
std::vector<NewsArticle> read_articles(std::istream& in);
std::vector<ClaimStatement> read_claims(std::istream& in);
std::vector<CSQAItem> read_csqa(std::istream& in);

std::vector<NewsArticle> load_articles(const std::filesystem::path& path);
std::vector<ClaimStatement> load_claims(const std::filesystem::path& path);
std::vector<CSQAItem> load_csqa(const std::filesystem::path& path);

void write_articles(std::ostream& out, const std::vector<NewsArticle>& records);
void write_claims(std::ostream& out, const std::vector<ClaimStatement>& records);
void write_csqa(std::ostream& out, const std::vector<CSQAItem>& records);

void save_articles(const std::filesystem::path& path, const std::vector<NewsArticle>& records);

}  // namespace mtnews

#endif  // MTNEWS_JSONL_H_
