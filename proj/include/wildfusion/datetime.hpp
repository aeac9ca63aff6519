#pragma once

#include <cstdint>
#include <string>

namespace wildfusion {

// Calendar timestamp, proleptic Gregorian. Seconds precision is enough for
// the ±24h weather window.
struct DateTime {
  int year = 1970;
  int month = 1;  // 1-12
  int day = 1;    // 1-31
  int hour = 0;   // 0-23
  int minute = 0;
  int second = 0;

  bool operator==(const DateTime&) const = default;
};

// "YYYY-MM-DDTHH:MM:SS" (a trailing "Z" is accepted and ignored).
DateTime parse_datetime(const std::string& iso);
std::string format_datetime(const DateTime& dt);

// Seconds since 1970-01-01T00:00:00; negative before the epoch.
std::int64_t to_epoch_seconds(const DateTime& dt);
DateTime from_epoch_seconds(std::int64_t seconds);

// Field-range validation, month lengths included (leap years honored).
bool is_valid_datetime(const DateTime& dt);

inline double hours_between(const DateTime& a, const DateTime& b) {
  return static_cast<double>(to_epoch_seconds(b) - to_epoch_seconds(a)) /
         3600.0;
}

}  // namespace wildfusion
