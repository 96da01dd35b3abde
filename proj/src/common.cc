#include "mtnews/common.h"

#include <charconv>
#include <cmath>
#include <numbers>

namespace mtnews {

double Rng::normal(double mean, double stddev) {
  // Box-Muller; u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

std::string format_double(double x) {
  if (x == 0.0) return std::signbit(x) ? "-0" : "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

std::string format_fixed(double x, int digits) {
  char buf[128];
  // Avoid printing "-0.00" for tiny negatives.
  const double scale = std::pow(10.0, digits);
  if (std::round(x * scale) == 0.0) x = 0.0;
  auto [end, ec] =
      std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::fixed, digits);
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(0, "not a number: '" + std::string(s) + "'");
  }
  return value;
}

long long parse_int(std::string_view s) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(0, "not an integer: '" + std::string(s) + "'");
  }
  return value;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    while (i < n && (s[i] == ' ' || s[i] == '\t' || s[i] == '\n' ||
                     s[i] == '\r' || s[i] == '\f' || s[i] == '\v')) {
      ++i;
    }
    std::size_t j = i;
    while (j < n && !(s[j] == ' ' || s[j] == '\t' || s[j] == '\n' ||
                      s[j] == '\r' || s[j] == '\f' || s[j] == '\v')) {
      ++j;
    }
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace mtnews
