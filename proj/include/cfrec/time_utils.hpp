#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>

namespace cfrec {

// All instants are UTC with whole-second resolution.
using UtcTime = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;

// Parses an RFC 3339 UTC timestamp, e.g. "2024-01-15T10:30:00Z". Only the
// "Z" offset is accepted; fractional seconds are allowed and truncated.
// Returns nullopt for anything malformed or an impossible calendar date.
inline std::optional<UtcTime> parse_rfc3339(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &y, &mo, &d, &h,
                  &mi, &s, &consumed) != 6 ||
      consumed != 19) {
    return std::nullopt;
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  if (pos + 1 != text.size() || (text[pos] != 'Z' && text[pos] != 'z')) {
    return std::nullopt;
  }

  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || h < 0 || mi > 59 || mi < 0 || s > 60 || s < 0) {
    return std::nullopt;
  }
  if (s == 60) s = 59;  // fold leap seconds
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} +
         std::chrono::minutes{mi} + std::chrono::seconds{s};
}

inline std::string format_rfc3339(UtcTime tp) {
  const auto days = std::chrono::floor<std::chrono::days>(tp);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss<std::chrono::seconds> tod{tp - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ",
                int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()),
                long(tod.hours().count()), long(tod.minutes().count()),
                long(tod.seconds().count()));
  return buf;
}

}  // namespace cfrec
