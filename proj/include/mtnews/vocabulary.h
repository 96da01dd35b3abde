#ifndef MTNEWS_VOCABULARY_H_
#define MTNEWS_VOCABULARY_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtnews {

// Word-level token vocabulary with fixed special ids.
class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnk = 1;
  static constexpr std::int32_t kCls = 2;
  static constexpr std::int32_t kSep = 3;
  static constexpr std::int32_t kMask = 4;
  static constexpr std::size_t kNumSpecials = 5;

  // Only the five specials.
  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  std::int32_t id(const std::string& token) const;  // kUnk when unknown
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::vector<std::int32_t> ids(const std::string& text) const;

  // `token<TAB>id` per line, ordered by id.
  void save(std::ostream& out) const;
  static Vocabulary load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  friend Vocabulary build_vocab(const std::vector<std::string>&, std::size_t);
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Whitespace tokens ranked by frequency (lexicographic tiebreak); the top
// max_size - 5 follow the specials. Throws DomainError when max_size < 6.
Vocabulary build_vocab(const std::vector<std::string>& texts, std::size_t max_size);

}  // namespace mtnews

#endif  // MTNEWS_VOCABULARY_H_
