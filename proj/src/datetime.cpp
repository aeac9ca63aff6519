#include "wildfusion/datetime.hpp"

#include <array>
#include <cstdio>

#include "wildfusion/errors.hpp"

namespace wildfusion {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[static_cast<std::size_t>(m - 1)];
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace

bool is_valid_datetime(const DateTime& dt) {
  if (dt.month < 1 || dt.month > 12) return false;
  if (dt.day < 1 || dt.day > days_in_month(dt.year, dt.month)) return false;
  if (dt.hour < 0 || dt.hour > 23) return false;
  if (dt.minute < 0 || dt.minute > 59) return false;
  if (dt.second < 0 || dt.second > 59) return false;
  return true;
}

DateTime parse_datetime(const std::string& iso) {
  DateTime dt;
  char sep = 0;
  const int n =
      std::sscanf(iso.c_str(), "%d-%d-%d%c%d:%d:%d", &dt.year, &dt.month,
                  &dt.day, &sep, &dt.hour, &dt.minute, &dt.second);
  if (n < 3 || (n > 3 && sep != 'T' && sep != ' ') || (n > 3 && n < 7)) {
    throw DataError("invalid datetime '" + iso +
                    "', expected YYYY-MM-DDTHH:MM:SS");
  }
  if (!is_valid_datetime(dt)) {
    throw DataError("datetime out of range: '" + iso + "'");
  }
  return dt;
}

std::string format_datetime(const DateTime& dt) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", dt.year,
                dt.month, dt.day, dt.hour, dt.minute, dt.second);
  return buf;
}

std::int64_t to_epoch_seconds(const DateTime& dt) {
  return days_from_civil(dt.year, dt.month, dt.day) * 86400 + dt.hour * 3600 +
         dt.minute * 60 + dt.second;
}

DateTime from_epoch_seconds(std::int64_t seconds) {
  std::int64_t days = seconds / 86400;
  std::int64_t rest = seconds % 86400;
  if (rest < 0) {
    rest += 86400;
    days -= 1;
  }
  // Howard Hinnant's civil_from_days.
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const auto doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  DateTime dt;
  dt.year = static_cast<int>(y + (m <= 2));
  dt.month = static_cast<int>(m);
  dt.day = static_cast<int>(d);
  dt.hour = static_cast<int>(rest / 3600);
  dt.minute = static_cast<int>((rest % 3600) / 60);
  dt.second = static_cast<int>(rest % 60);
  return dt;
}

}  // namespace wildfusion
