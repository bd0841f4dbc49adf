#pragma once

#include <string>
#include <vector>

// Deterministic SVG rendering: fixed canvas, fixed fonts, no generated ids,
// coordinates printed with two decimals.
namespace phc::plot {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Labels {
  std::string title;
  std::string x;
  std::string y;
};

std::string line_plot(const std::vector<Series>& series, const Labels& labels);

// values[row][col] with rows along y_axis and columns along x_axis.
std::string heatmap(const std::vector<double>& x_axis, const std::vector<double>& y_axis,
                    const std::vector<std::vector<double>>& values, const Labels& labels);

}  // namespace phc::plot
