#include "mtnews/jsonl.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "mtnews/common.h"
#include "mtnews/text_clean.h"

namespace mtnews {
namespace {

using nlohmann::json;

std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }

const json& require(const json& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw ValidationError(field, where(line) + "missing field '" + field + "'");
  }
  return *it;
}

std::string require_string(const json& obj, const char* field, std::size_t line) {
  const json& v = require(obj, field, line);
  if (!v.is_string()) {
    throw ValidationError(field, where(line) + "field '" + std::string(field) +
                                     "' must be a string");
  }
  return v.get<std::string>();
}

std::string require_nonempty_text(const json& obj, const char* field, std::size_t line) {
  std::string s = require_string(obj, field, line);
  if (clean_text(s).empty()) {
    throw ValidationError(field, where(line) + "field '" + std::string(field) +
                                     "' is empty after cleaning");
  }
  return s;
}

template <typename Record, typename Parse>
std::vector<Record> read_lines(std::istream& in, Parse parse) {
  std::vector<Record> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, where(line) + "malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw ParseError(line, where(line) + "expected a JSON object");
    }
    out.push_back(parse(obj, line));
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return in;
}

NewsArticle parse_article(const json& obj, std::size_t line) {
  NewsArticle a;
  a.id = require_string(obj, "id", line);
  if (a.id.empty()) throw ValidationError("id", where(line) + "empty id");
  a.title = require_nonempty_text(obj, "title", line);
  a.body = require_nonempty_text(obj, "body", line);
  a.source = require_string(obj, "source", line);
  if (a.source.empty()) throw ValidationError("source", where(line) + "empty source");
  for (char& c : a.source) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  const std::string type = require_string(obj, "source_type", line);
  auto parsed_type = parse_source_type(type);
  if (!parsed_type) {
    throw ValidationError("source_type",
                          where(line) + "unknown source_type '" + type + "'");
  }
  a.source_type = *parsed_type;
  const std::string date = require_string(obj, "published", line);
  auto parsed_date = Date::parse(date);
  if (!parsed_date) {
    throw ValidationError("published", where(line) + "invalid date '" + date + "'");
  }
  a.published = *parsed_date;
  if (auto it = obj.find("subreddit"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw ValidationError("subreddit", where(line) + "subreddit must be a string");
    }
    a.subreddit = it->get<std::string>();
  }
  return a;
}

ClaimStatement parse_claim(const json& obj, std::size_t line) {
  ClaimStatement c;
  c.text = require_nonempty_text(obj, "text", line);
  const std::string label = require_string(obj, "label", line);
  auto parsed_label = parse_claim_label(label);
  if (!parsed_label) {
    throw ValidationError("label", where(line) + "unknown label '" + label + "'");
  }
  c.label = *parsed_label;
  const std::string split = require_string(obj, "split", line);
  auto parsed_split = parse_data_split(split);
  if (!parsed_split) {
    throw ValidationError("split", where(line) + "unknown split '" + split + "'");
  }
  c.split = *parsed_split;
  if (auto it = obj.find("annotations"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) {
      throw ValidationError("annotations", where(line) + "annotations must be an array");
    }
    for (const json& v : *it) {
      if (!v.is_number()) {
        throw ValidationError("annotations", where(line) + "annotations must be numbers");
      }
      c.annotations.push_back(v.get<double>());
    }
  }
  return c;
}

CSQAItem parse_csqa(const json& obj, std::size_t line) {
  CSQAItem item;
  item.question = require_nonempty_text(obj, "question", line);
  const json& choices = require(obj, "choices", line);
  if (!choices.is_array() || choices.size() < 2 || choices.size() > 8) {
    throw ValidationError("choices", where(line) + "choices must be an array of 2..8 strings");
  }
  for (const json& c : choices) {
    if (!c.is_string() || c.get<std::string>().empty()) {
      throw ValidationError("choices", where(line) + "choices must be non-empty strings");
    }
    item.choices.push_back(c.get<std::string>());
  }
  const json& answer = require(obj, "answer_index", line);
  if (!answer.is_number_integer() || answer.get<long long>() < 0 ||
      answer.get<long long>() >= static_cast<long long>(item.choices.size())) {
    throw ValidationError("answer_index", where(line) + "answer_index out of range");
  }
  item.answer_index = answer.get<std::size_t>();
  return item;
}

}  // namespace

std::vector<NewsArticle> read_articles(std::istream& in) {
  return read_lines<NewsArticle>(in, parse_article);
}
std::vector<ClaimStatement> read_claims(std::istream& in) {
  return read_lines<ClaimStatement>(in, parse_claim);
}
std::vector<CSQAItem> read_csqa(std::istream& in) {
  return read_lines<CSQAItem>(in, parse_csqa);
}

std::vector<NewsArticle> load_articles(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_articles(in);
}
std::vector<ClaimStatement> load_claims(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_claims(in);
}
std::vector<CSQAItem> load_csqa(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_csqa(in);
}

void write_articles(std::ostream& out, const std::vector<NewsArticle>& records) {
  for (const NewsArticle& a : records) {
    json obj = json::object();
    obj["id"] = a.id;
    obj["title"] = a.title;
    obj["body"] = a.body;
    obj["source"] = a.source;
    obj["source_type"] = std::string(to_string(a.source_type));
    obj["published"] = a.published.to_string();
    if (a.subreddit) obj["subreddit"] = *a.subreddit;
    out << obj.dump() << '\n';
  }
}

void write_claims(std::ostream& out, const std::vector<ClaimStatement>& records) {
  for (const ClaimStatement& c : records) {
    json obj = json::object();
    obj["text"] = c.text;
    obj["label"] = std::string(to_string(c.label));
    obj["split"] = std::string(to_string(c.split));
    if (!c.annotations.empty()) obj["annotations"] = c.annotations;
    out << obj.dump() << '\n';
  }
}

void write_csqa(std::ostream& out, const std::vector<CSQAItem>& records) {
  for (const CSQAItem& item : records) {
    json obj = json::object();
    obj["question"] = item.question;
    obj["choices"] = item.choices;
    obj["answer_index"] = item.answer_index;
    out << obj.dump() << '\n';
  }
}

void save_articles(const std::filesystem::path& path, const std::vector<NewsArticle>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(0, "cannot write " + path.string());
  write_articles(out, records);
}

}  // namespace mtnews
