#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stancelab {

/// Raised for every fatal condition: unmet preconditions, malformed input,
/// consistency violations between artifacts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using UserId = std::string;

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Closed interval [start, end] of UTC seconds.
struct TimeRange {
  Timestamp start = 0;
  Timestamp end = 0;

  bool contains(Timestamp t) const { return t >= start && t <= end; }
  bool operator==(const TimeRange&) const = default;
};

// Civil-date helpers (proleptic Gregorian, UTC).
std::int64_t days_from_civil(int year, unsigned month, unsigned day);
void civil_from_days(std::int64_t days, int& year, unsigned& month, unsigned& day);

/// Parses "YYYY-MM-DD" (midnight UTC) or a plain integer of epoch seconds.
Timestamp parse_date(std::string_view text);
/// Parses "YYYY-MM-DD" as the last second of that day; integers pass through.
Timestamp parse_date_end(std::string_view text);
std::string format_date(Timestamp t);
int year_of(Timestamp t);

struct IsoWeek {
  int year = 0;
  unsigned week = 0;
  auto operator<=>(const IsoWeek&) const = default;
  std::string label() const;  // "2018-W07"
};
IsoWeek iso_week(Timestamp t);
/// Monday 00:00 UTC of the ISO week containing t.
Timestamp iso_week_start(Timestamp t);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
bool starts_with(std::string_view text, std::string_view prefix);

/// Exact textual form of a double ("%a"); read back with parse_double.
std::string hexfloat(double v);
/// Shortest-roundtrip-safe decimal ("%.17g"), integers printed without exponent.
std::string exact_decimal(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Reads a whole file; throws Error when unreadable.
std::string read_file(const std::string& path);
/// Writes through a temporary sibling and renames into place.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace stancelab
