#include "mtnews/text_clean.h"

#include <regex>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace mtnews {
namespace {

const std::regex& url_pattern() {
  static const std::regex re(R"((?:https?://|ftp://|www\.)[^\s<>]+)",
                             std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& email_pattern() {
  static const std::regex re(
      R"([a-z0-9._%+\-]+@[a-z0-9\-]+(?:\.[a-z0-9\-]+)*\.[a-z]{2,})",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

const std::regex& phone_pattern() {
  static const std::regex re(
      R"((?:\+\d{1,3}[ .\-]?)?(?:\(\d{3}\)|\d{3})[ .\-]?\d{3}[ .\-]?\d{4})",
      std::regex::ECMAScript | std::regex::optimize);
  return re;
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

// Replaces every match of `re`. When `digit_bounded` is set, a match only
// counts if it is not embedded inside a longer digit run.
std::string replace_all(const std::string& text, const std::regex& re,
                        const std::string& tag, bool digit_bounded) {
  std::string out;
  out.reserve(text.size());
  auto begin = text.cbegin();
  auto pos = begin;
  std::smatch m;
  while (pos != text.cend() &&
         std::regex_search(pos, text.cend(), m, re,
                           pos == begin ? std::regex_constants::match_default
                                        : std::regex_constants::match_prev_avail)) {
    auto mbegin = m[0].first;
    auto mend = m[0].second;
    if (mbegin == mend) break;
    bool ok = true;
    if (digit_bounded) {
      if (mbegin != begin && is_ascii_digit(*(mbegin - 1))) ok = false;
      if (mend != text.cend() && is_ascii_digit(*mend)) ok = false;
    }
    if (ok) {
      out.append(pos, mbegin);
      out += tag;
      pos = mend;
    } else {
      out.append(pos, mbegin + 1);
      pos = mbegin + 1;
    }
  }
  out.append(pos, text.cend());
  return out;
}

}  // namespace

std::string clean_text(std::string_view raw) {
  if (raw.empty()) return {};

  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_SUCCESS(status)) {
    icu::UnicodeString normalized = nfc->normalize(text, status);
    if (U_SUCCESS(status)) text = normalized;
  }
  text.toLower(icu::Locale::getRoot());

  std::string utf8;
  text.toUTF8String(utf8);
  utf8 = replace_all(utf8, url_pattern(), "<url>", false);
  utf8 = replace_all(utf8, email_pattern(), "<email>", false);
  utf8 = replace_all(utf8, phone_pattern(), "<phone>", true);

  // Currency symbols, digit runs and whitespace work on code points.
  const icu::UnicodeString tagged = icu::UnicodeString::fromUTF8(utf8);
  icu::UnicodeString result;
  bool in_digits = false;
  bool pending_space = false;
  for (int32_t i = 0; i < tagged.length();) {
    const UChar32 c = tagged.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      in_digits = false;
      pending_space = !result.isEmpty();
      continue;
    }
    if (pending_space) {
      result.append(u' ');
      pending_space = false;
    }
    if (u_isdigit(c)) {
      if (!in_digits) result.append(icu::UnicodeString(u"<number>"));
      in_digits = true;
      continue;
    }
    in_digits = false;
    if (u_charType(c) == U_CURRENCY_SYMBOL) {
      result.append(icu::UnicodeString(u"<cur>"));
    } else {
      result.append(c);
    }
  }

  std::string out;
  result.toUTF8String(out);
  return out;
}

}  // namespace mtnews
