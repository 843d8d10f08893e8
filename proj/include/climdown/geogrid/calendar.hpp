#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace climdown::geogrid {

enum class Calendar { kStandard, kNoLeap, k360Day };

std::string_view to_string(Calendar cal);
/// Accepts "standard", "gregorian", "proleptic_gregorian", "noleap", "365_day", "360_day".
Calendar parse_calendar(std::string_view text);

struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

int days_in_month(Calendar cal, int year, int month);
bool is_valid(Calendar cal, const Date& d);
/// Next calendar day under `cal`.
Date next_day(Calendar cal, const Date& d);

/// ISO "YYYY-MM-DD". Parsing checks the shape only; calendar membership is checked by is_valid.
std::string format_iso(const Date& d);
Date parse_iso(std::string_view text);

}  // namespace climdown::geogrid
