#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "stancelab/common.hpp"

using namespace stancelab;

TEST(Dates, ParseAndFormat) {
  EXPECT_EQ(parse_date("2018-01-01"), 1514764800);
  EXPECT_EQ(parse_date_end("2018-01-01"), 1514764800 + 86399);
  EXPECT_EQ(parse_date("1514764800"), 1514764800);
  EXPECT_EQ(format_date(1514764800 + 3600), "2018-01-01");
  EXPECT_EQ(year_of(parse_date("2019-12-31")), 2019);
  EXPECT_THROW(parse_date("2018-02-30"), Error);
  EXPECT_THROW(parse_date("yesterday"), Error);
}

TEST(Dates, IsoWeeks) {
  EXPECT_EQ(iso_week(parse_date("2018-02-14")).label(), "2018-W07");
  // 2021-01-03 is a Sunday still in ISO week 53 of 2020.
  EXPECT_EQ(iso_week(parse_date("2021-01-03")).label(), "2020-W53");
  EXPECT_EQ(format_date(iso_week_start(parse_date("2018-02-14"))), "2018-02-12");
}

TEST(Strings, SplitTrim) {
  EXPECT_EQ(split("a\tb\t", '\t'), (std::vector<std::string>{"a", "b", ""}));
  EXPECT_EQ(trim("  x y \n"), "x y");
  EXPECT_TRUE(starts_with("profile:x", "profile:"));
  EXPECT_FALSE(starts_with("pro", "profile:"));
}

TEST(Numbers, HexfloatRoundTrip) {
  for (double v : {0.0, -1.5, 0.1, 1e-300, 123456.789, std::nextafter(1.0, 2.0)}) {
    EXPECT_EQ(parse_double(hexfloat(v)), v);
    EXPECT_EQ(parse_double(exact_decimal(v)), v);
  }
  EXPECT_EQ(parse_int("-42"), -42);
  EXPECT_THROW(parse_double("1.0x"), Error);
  EXPECT_THROW(parse_int("4.5"), Error);
}

TEST(Files, AtomicWriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "stancelab_common_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "f.txt").string();
  write_file_atomic(path, "hello\n");
  write_file_atomic(path, "again\n");
  EXPECT_EQ(read_file(path), "again\n");
  EXPECT_THROW(read_file((dir / "missing").string()), Error);
  std::filesystem::remove_all(dir);
}
