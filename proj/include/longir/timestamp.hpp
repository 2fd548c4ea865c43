#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace longir {

/// Calendar precision of a Timestamp.
enum class TimePrecision : int { Second = 0, Day = 1, Month = 2 };

/// A UTC-naive civil timestamp with explicit precision.
///
/// A month-precision value stands for the whole month, a day-precision value
/// for the whole day. Timestamps are totally ordered by the earliest instant
/// of the period they cover; when two values start at the same instant the
/// one with finer precision sorts first.
///
/// Canonical text forms are "YYYY-MM", "YYYY-MM-DD" and
/// "YYYY-MM-DDTHH:MM:SS"; parse() followed by to_string() is the identity on
/// these.
class Timestamp {
public:
  Timestamp() = default;  // 1970-01, month precision

  static Timestamp month(int year, int month);
  static Timestamp day(int year, int month, int day);
  static Timestamp second(int year, int month, int day, int hour, int minute,
                          int second);

  /// Parses one of the canonical forms; throws std::invalid_argument on
  /// anything else (including out-of-range calendar fields).
  static Timestamp parse(std::string_view text);
  static std::optional<Timestamp> try_parse(std::string_view text);

  TimePrecision precision() const { return precision_; }
  int year() const { return year_; }
  int month() const { return month_; }
  int day() const { return day_; }
  int hour() const { return hour_; }
  int minute() const { return minute_; }
  int second() const { return second_; }

  /// Seconds since 1970-01-01T00:00:00 of the earliest instant covered.
  std::int64_t earliest_instant() const;

  std::string to_string() const;

  friend bool operator==(const Timestamp& a, const Timestamp& b) {
    return a.earliest_instant() == b.earliest_instant() &&
           a.precision_ == b.precision_;
  }
  friend bool operator<(const Timestamp& a, const Timestamp& b) {
    auto ia = a.earliest_instant(), ib = b.earliest_instant();
    if (ia != ib) return ia < ib;
    return static_cast<int>(a.precision_) < static_cast<int>(b.precision_);
  }
  friend bool operator!=(const Timestamp& a, const Timestamp& b) { return !(a == b); }
  friend bool operator>(const Timestamp& a, const Timestamp& b) { return b < a; }
  friend bool operator<=(const Timestamp& a, const Timestamp& b) { return !(b < a); }
  friend bool operator>=(const Timestamp& a, const Timestamp& b) { return !(a < b); }

private:
  std::int16_t year_ = 1970;
  std::int8_t month_ = 1;
  std::int8_t day_ = 1;
  std::int8_t hour_ = 0;
  std::int8_t minute_ = 0;
  std::int8_t second_ = 0;
  TimePrecision precision_ = TimePrecision::Month;
};

}  // namespace longir
