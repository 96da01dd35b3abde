#ifndef MTNEWS_TEXT_CLEAN_H_
#define MTNEWS_TEXT_CLEAN_H_

#include <string>
#include <string_view>

namespace mtnews {

// Normalizes raw UTF-8 text for all downstream models. Steps, in order:
//   1. Unicode NFC
//   2. lowercase
//   3. URLs            -> <url>
//   4. e-mail addresses -> <email>
//   5. phone numbers   -> <phone>
//   6. currency symbols -> <cur>
//   7. digit runs      -> <number>
//   8. whitespace runs collapsed to one space, ends trimmed
// The function is idempotent. Invalid UTF-8 sequences become U+FFFD.
std::string clean_text(std::string_view raw);

}  // namespace mtnews

#endif  // MTNEWS_TEXT_CLEAN_H_
