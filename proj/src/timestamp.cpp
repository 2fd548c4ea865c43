#include "longir/timestamp.hpp"

#include <cstdio>
#include <stdexcept>

namespace longir {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return d[m - 1];
}

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("invalid timestamp: ") + what);
}

void validate(int y, int mo, int d, int h, int mi, int s) {
  check(y >= 1 && y <= 9999, "year out of range");
  check(mo >= 1 && mo <= 12, "month out of range");
  check(d >= 1 && d <= days_in_month(y, mo), "day out of range");
  check(h >= 0 && h <= 23, "hour out of range");
  check(mi >= 0 && mi <= 59, "minute out of range");
  check(s >= 0 && s <= 59, "second out of range");
}

bool all_digits(std::string_view v) {
  if (v.empty()) return false;
  for (char c : v)
    if (c < '0' || c > '9') return false;
  return true;
}

int num(std::string_view v) {
  int r = 0;
  for (char c : v) r = r * 10 + (c - '0');
  return r;
}

}  // namespace

Timestamp Timestamp::month(int year, int month) {
  validate(year, month, 1, 0, 0, 0);
  Timestamp t;
  t.year_ = static_cast<std::int16_t>(year);
  t.month_ = static_cast<std::int8_t>(month);
  t.precision_ = TimePrecision::Month;
  return t;
}

Timestamp Timestamp::day(int year, int month, int day) {
  validate(year, month, day, 0, 0, 0);
  Timestamp t;
  t.year_ = static_cast<std::int16_t>(year);
  t.month_ = static_cast<std::int8_t>(month);
  t.day_ = static_cast<std::int8_t>(day);
  t.precision_ = TimePrecision::Day;
  return t;
}

Timestamp Timestamp::second(int year, int month, int day, int hour, int minute,
                            int second) {
  validate(year, month, day, hour, minute, second);
  Timestamp t;
  t.year_ = static_cast<std::int16_t>(year);
  t.month_ = static_cast<std::int8_t>(month);
  t.day_ = static_cast<std::int8_t>(day);
  t.hour_ = static_cast<std::int8_t>(hour);
  t.minute_ = static_cast<std::int8_t>(minute);
  t.second_ = static_cast<std::int8_t>(second);
  t.precision_ = TimePrecision::Second;
  return t;
}

std::optional<Timestamp> Timestamp::try_parse(std::string_view v) {
  auto field = [&](size_t pos, size_t len) { return v.substr(pos, len); };
  auto digits_at = [&](size_t pos, size_t len) { return all_digits(field(pos, len)); };
  try {
    if (v.size() == 7 && v[4] == '-' && digits_at(0, 4) && digits_at(5, 2)) {
      return Timestamp::month(num(field(0, 4)), num(field(5, 2)));
    }
    if (v.size() == 10 && v[4] == '-' && v[7] == '-' && digits_at(0, 4) &&
        digits_at(5, 2) && digits_at(8, 2)) {
      return Timestamp::day(num(field(0, 4)), num(field(5, 2)), num(field(8, 2)));
    }
    if (v.size() == 19 && v[4] == '-' && v[7] == '-' && v[10] == 'T' &&
        v[13] == ':' && v[16] == ':' && digits_at(0, 4) && digits_at(5, 2) &&
        digits_at(8, 2) && digits_at(11, 2) && digits_at(14, 2) &&
        digits_at(17, 2)) {
      return Timestamp::second(num(field(0, 4)), num(field(5, 2)),
                               num(field(8, 2)), num(field(11, 2)),
                               num(field(14, 2)), num(field(17, 2)));
    }
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  return std::nullopt;
}

Timestamp Timestamp::parse(std::string_view text) {
  auto t = try_parse(text);
  if (!t)
    throw std::invalid_argument("invalid timestamp: '" + std::string(text) +
                                "' (expected YYYY-MM, YYYY-MM-DD or "
                                "YYYY-MM-DDTHH:MM:SS)");
  return *t;
}

std::int64_t Timestamp::earliest_instant() const {
  return days_from_civil(year_, month_, day_) * 86400 + hour_ * 3600 +
         minute_ * 60 + second_;
}

std::string Timestamp::to_string() const {
  char buf[32];
  switch (precision_) {
    case TimePrecision::Month:
      std::snprintf(buf, sizeof buf, "%04d-%02d", year_, month_);
      break;
    case TimePrecision::Day:
      std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year_, month_, day_);
      break;
    case TimePrecision::Second:
      std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d", year_,
                    month_, day_, hour_, minute_, second_);
      break;
  }
  return buf;
}

}  // namespace longir
