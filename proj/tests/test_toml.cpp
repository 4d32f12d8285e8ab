#include "doctest.h"

#include "af/toml.hpp"

using namespace af;

TEST_CASE("toml: scalars, strings, booleans") {
  toml::Table doc = toml::parse(
      "a = 1\n"
      "b = 2.5\n"
      "c = \"hello world\"\n"
      "d = true\n"
      "e = -4  # trailing comment\n");
  CHECK(doc.at("a").as_int() == 1);
  CHECK(doc.at("b").as_double() == doctest::Approx(2.5));
  CHECK(doc.at("c").as_string() == "hello world");
  CHECK(doc.at("d").as_bool());
  CHECK(doc.at("e").as_int() == -4);
  CHECK(doc.at("a").as_double() == 1.0);  // integers promote to double
}

TEST_CASE("toml: nested and multi-line arrays") {
  toml::Table doc = toml::parse(
      "mics = [\n"
      "  [0.0, 0.1, 0.2],  # one\n"
      "  [1.0, 1.1, 1.2],\n"
      "]\n"
      "flat = [1, 2, 3]\n");
  const auto& mics = doc.at("mics").as_array();
  REQUIRE(mics.size() == 2);
  CHECK(mics[1].as_double_array() == std::vector<double>{1.0, 1.1, 1.2});
  CHECK(doc.at("flat").as_double_array() == std::vector<double>{1, 2, 3});
}

TEST_CASE("toml: sections and table arrays") {
  toml::Table doc = toml::parse(
      "top = 1\n"
      "[input]\n"
      "audio = \"a.wav\"\n"
      "[params]\n"
      "window = 256\n"
      "[[sources]]\n"
      "azimuth_deg = 40.0\n"
      "[[sources]]\n"
      "azimuth_deg = -20.0\n");
  CHECK(doc.at("top").as_int() == 1);
  CHECK(doc.table("input").at("audio").as_string() == "a.wav");
  CHECK(doc.table("params").get_int("window", 0) == 256);
  REQUIRE(doc.table_array("sources").size() == 2);
  CHECK(doc.table_array("sources")[1].get_double("azimuth_deg", 0) == doctest::Approx(-20.0));
}

TEST_CASE("toml: parse errors") {
  CHECK_THROWS_AS(toml::parse("novalue\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a = [1, 2\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a = \"unterminated\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a = zzz\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse("a = 1\na = 2\n"), toml::ParseError);
  CHECK_THROWS_AS(toml::parse_file("/nonexistent/x.toml"), toml::ParseError);
}
