#include <cmath>

#include <doctest.h>

#include "phc/error.hpp"
#include "phc/plot.hpp"

using namespace phc;

TEST_SUITE("plot") {

TEST_CASE("line plots are deterministic and well formed") {
  plot::Series a{"lower", {-100, 0, 100}, {-80, -39, -5}};
  plot::Series b{"upper", {-100, 0, 100}, {5, 39, 80}};
  const auto svg1 = plot::line_plot({a, b}, {"anti-crossing", "detuning", "energy"});
  const auto svg2 = plot::line_plot({a, b}, {"anti-crossing", "detuning", "energy"});
  CHECK(svg1 == svg2);
  CHECK(svg1.rfind("<svg", 0) == 0);
  CHECK(svg1.find("</svg>") != std::string::npos);
  CHECK(svg1.find("anti-crossing") != std::string::npos);
  CHECK(svg1.find("upper") != std::string::npos);
}

TEST_CASE("text is escaped") {
  const auto svg = plot::line_plot({{"a<b & c", {0, 1}, {0, 1}}}, {"x>y", "", ""});
  CHECK(svg.find("a&lt;b &amp; c") != std::string::npos);
  CHECK(svg.find("x&gt;y") != std::string::npos);
}

TEST_CASE("heatmap") {
  const std::vector<double> x{0, 1, 2};
  const std::vector<double> y{0, 1};
  const std::vector<std::vector<double>> v{{0, 1, 2}, {3, 4, 5}};
  const auto svg = plot::heatmap(x, y, v, {"map", "E", "delta"});
  CHECK(svg == plot::heatmap(x, y, v, {"map", "E", "delta"}));
  CHECK(svg.find("<rect") != std::string::npos);
}

TEST_CASE("plot errors") {
  CHECK_THROWS_AS(plot::line_plot({}, {}), ParameterError);
  CHECK_THROWS_AS(plot::line_plot({{"s", {1, 2}, {1}}}, {}), ParameterError);
  CHECK_THROWS_AS(plot::line_plot({{"s", {}, {}}}, {}), ParameterError);
  CHECK_THROWS_AS(plot::line_plot({{"s", {NAN}, {NAN}}}, {}), ParameterError);
  CHECK_THROWS_AS(plot::heatmap({0}, {0, 1}, {{0}, {0}}, {}), ParameterError);
  CHECK_THROWS_AS(plot::heatmap({0, 1}, {0, 1}, {{0, 1}}, {}), ParameterError);
  CHECK_THROWS_AS(plot::heatmap({0, 1}, {0, 1}, {{0, 1}, {0}}, {}), ParameterError);
}

}  // TEST_SUITE
