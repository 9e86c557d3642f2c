#include "photon_discerner/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace pdisc;

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.0 / 3.0 * 1e-300, 6.02214076e23, -0.0, 1e-5, 123456789.0}) {
    const auto s = io::format_double(v);
    EXPECT_EQ(std::strtod(s.c_str(), nullptr), v) << s;
    EXPECT_EQ(s.find(','), std::string::npos);
  }
  EXPECT_EQ(io::format_double(0.25), "0.25");
  EXPECT_EQ(io::format_double(std::nan("")), "nan");
  EXPECT_EQ(io::format_double(-HUGE_VAL), "-inf");
}

TEST(Csv, QuotingAndShape) {
  EXPECT_EQ(io::csv_escape("plain"), "plain");
  EXPECT_EQ(io::csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(io::csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(io::csv_escape("two\nlines"), "\"two\nlines\"");

  io::CsvTable t({"name", "value", "flag"});
  t.add("x,y", 0.5, true);
  t.add(std::string("z"), 3, false);
  EXPECT_EQ(t.str(), "name,value,flag\r\n\"x,y\",0.5,1\r\nz,3,0\r\n");
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_THROW(t.add("short"), ConfigError);
  EXPECT_EQ(t.rows(), 3u);
}

TEST(Pgm, EightAndSixteenBit) {
  const std::vector<double> v{0.0, 0.5, 1.0, 2.0, -1.0, std::nan("")};
  const auto b8 = io::pgm_bytes(3, 2, v, 8);
  EXPECT_EQ(b8.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(b8.size(), 11u + 6u);
  EXPECT_EQ(static_cast<unsigned char>(b8[12]), 128);  // 0.5 rounds half up
  const auto img = io::parse_pgm(b8);
  EXPECT_EQ(img.width, 3);
  EXPECT_EQ(img.values[2], 1.0);
  EXPECT_EQ(img.values[3], 1.0);
  EXPECT_EQ(img.values[4], 0.0);
  EXPECT_EQ(img.values[5], 0.0);

  const auto b16 = io::pgm_bytes(3, 2, v, 16);
  EXPECT_EQ(b16.size(), std::string("P5\n3 2\n65535\n").size() + 12u);
  const auto img16 = io::parse_pgm(b16);
  EXPECT_NEAR(img16.values[1], 0.5, 1.0 / 65535);

  EXPECT_THROW(io::pgm_bytes(3, 2, v, 12), ConfigError);
  EXPECT_THROW(io::pgm_bytes(4, 2, v, 8), ConfigError);
  EXPECT_THROW(io::parse_pgm("P2\n1 1\n255\n0"), ConfigError);
  EXPECT_THROW(io::parse_pgm(b8.substr(0, b8.size() - 1)), ConfigError);
}

TEST(Files, WriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "pdisc_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const std::string bytes("a\0b\r\n", 5);
  io::write_file(dir / "x.bin", bytes);
  EXPECT_EQ(io::read_file(dir / "x.bin"), bytes);
  EXPECT_THROW(io::read_file(dir / "missing"), ConfigError);
  std::filesystem::remove_all(dir.parent_path());
}

TEST(NormalMap, Parse) {
  const auto m = io::parse_normal_map("# comment\n2 1\n0 0 1\n\n  0.6 0 0.8\n");
  EXPECT_EQ(m.width, 2);
  EXPECT_EQ(m.height, 1);
  ASSERT_EQ(m.normals.size(), 2u);
  EXPECT_EQ(m.normals[1][0], 0.6);
  EXPECT_THROW(io::parse_normal_map(""), ConfigError);
  EXPECT_THROW(io::parse_normal_map("2 2\n0 0 1\n"), ConfigError);
  EXPECT_THROW(io::parse_normal_map("1 1\n0 zero 1\n"), ConfigError);
  EXPECT_THROW(io::parse_normal_map("0 1\n"), ConfigError);
}
