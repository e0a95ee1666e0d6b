#include "stancelab/common.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace stancelab {

// Howard Hinnant's days_from_civil / civil_from_days.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, unsigned& month, unsigned& day) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  day = doy - (153 * mp + 2) / 5 + 1;
  month = mp < 10 ? mp + 3 : mp - 9;
  year = static_cast<int>(y + (month <= 2));
}

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i)
    if (s[i] < '0' || s[i] > '9') return false;
  return true;
}

}  // namespace

Timestamp parse_date(std::string_view text) {
  text = trim(text);
  if (all_digits(text)) return parse_int(text);
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw Error("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  y = static_cast<int>(parse_int(text.substr(0, 4)));
  m = static_cast<unsigned>(parse_int(text.substr(5, 2)));
  d = static_cast<unsigned>(parse_int(text.substr(8, 2)));
  if (m < 1 || m > 12 || d < 1 || d > 31)
    throw Error("invalid date '" + std::string(text) + "'");
  const std::int64_t days = days_from_civil(y, m, d);
  int yy;
  unsigned mm, dd;
  civil_from_days(days, yy, mm, dd);
  if (mm != m || dd != d) throw Error("invalid date '" + std::string(text) + "'");
  return days * kDay;
}

Timestamp parse_date_end(std::string_view text) {
  text = trim(text);
  if (all_digits(text)) return parse_int(text);
  return parse_date(text) + kDay - 1;
}

std::string format_date(Timestamp t) {
  int y;
  unsigned m, d;
  civil_from_days(floor_div(t, kDay), y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

int year_of(Timestamp t) {
  int y;
  unsigned m, d;
  civil_from_days(floor_div(t, kDay), y, m, d);
  return y;
}

std::string IsoWeek::label() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-W%02u", year, week);
  return buf;
}

Timestamp iso_week_start(Timestamp t) {
  const std::int64_t days = floor_div(t, kDay);
  // 1970-01-01 was a Thursday; Monday-based weekday 0..6.
  const std::int64_t weekday = ((days + 3) % 7 + 7) % 7;
  return (days - weekday) * kDay;
}

IsoWeek iso_week(Timestamp t) {
  // The ISO year is the year of the Thursday of the same week.
  const std::int64_t monday = floor_div(iso_week_start(t), kDay);
  const std::int64_t thursday = monday + 3;
  int y;
  unsigned m, d;
  civil_from_days(thursday, y, m, d);
  const std::int64_t jan1 = days_from_civil(y, 1, 1);
  return IsoWeek{y, static_cast<unsigned>((thursday - jan1) / 7 + 1)};
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (true) {
    const std::size_t pos = text.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(begin));
      break;
    }
    out.emplace_back(text.substr(begin, pos - begin));
    begin = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view text) {
  const char* ws = " \t\r\n";
  const std::size_t b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const std::size_t e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

bool starts_with(std::string_view text, std::string_view prefix) {
  return text.substr(0, prefix.size()) == prefix;
}

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string exact_decimal(double v) {
  char buf[64];
  if (v == static_cast<double>(static_cast<long long>(v)) && v > -1e15 && v < 1e15)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  else
    std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text) {
  const std::string s(trim(text));
  if (s.empty()) throw Error("expected a number, got an empty field");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    throw Error("invalid number '" + s + "'");
  return v;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw Error("invalid integer '" + std::string(text) + "'");
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace stancelab
