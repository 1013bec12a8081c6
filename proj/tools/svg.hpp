#pragma once

#include <string>
#include <vector>

namespace flexasm::tools {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 800;
  int height = 500;
};

/// Line plot as a standalone SVG document.  Non-finite or non-positive
/// (on log axes) points break the polyline.
std::string line_plot(const std::vector<Series>& series, const PlotOptions& opts);

}  // namespace flexasm::tools
