#include "climdown/geogrid/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "climdown/error.hpp"

namespace climdown::geogrid {

std::string_view to_string(Calendar cal) {
  switch (cal) {
    case Calendar::kStandard: return "standard";
    case Calendar::kNoLeap: return "noleap";
    case Calendar::k360Day: return "360_day";
  }
  return "standard";
}

Calendar parse_calendar(std::string_view text) {
  if (text == "standard" || text == "gregorian" || text == "proleptic_gregorian")
    return Calendar::kStandard;
  if (text == "noleap" || text == "365_day") return Calendar::kNoLeap;
  if (text == "360_day") return Calendar::k360Day;
  throw ValidationError("unknown calendar '" + std::string(text) + "'");
}

namespace {
bool gregorian_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }
}  // namespace

int days_in_month(Calendar cal, int year, int month) {
  static constexpr int kDays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12) return 0;
  switch (cal) {
    case Calendar::k360Day: return 30;
    case Calendar::kNoLeap: return kDays[month - 1];
    case Calendar::kStandard:
      return month == 2 && gregorian_leap(year) ? 29 : kDays[month - 1];
  }
  return 0;
}

bool is_valid(Calendar cal, const Date& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(cal, d.year, d.month);
}

Date next_day(Calendar cal, const Date& d) {
  Date n = d;
  if (++n.day > days_in_month(cal, n.year, n.month)) {
    n.day = 1;
    if (++n.month > 12) {
      n.month = 1;
      ++n.year;
    }
  }
  return n;
}

std::string format_iso(const Date& d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

Date parse_iso(std::string_view text) {
  // YYYY-MM-DD, optionally followed by a time part which is ignored.
  auto fail = [&] { return ValidationError("malformed ISO date '" + std::string(text) + "'"); };
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') throw fail();
  Date d;
  auto num = [&](std::size_t pos, std::size_t len, int& out) {
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc() || ptr != first + len) throw fail();
  };
  num(0, 4, d.year);
  num(5, 2, d.month);
  num(8, 2, d.day);
  if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') throw fail();
  return d;
}

}  // namespace climdown::geogrid
