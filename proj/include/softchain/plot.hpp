#pragma once

#include <softchain/calib.hpp>

#include <string>
#include <utility>
#include <vector>

namespace softchain {

struct BoxGroup {
  std::string label;
  BoxStats stats;
};

/// Box plot (whiskers at min/max, box at quartiles, line at median, dot at mean). On a log
/// axis non-positive values are drawn at the bottom edge.
std::string boxplot_svg(const std::string& title, const std::string& y_label,
                        const std::vector<BoxGroup>& groups, bool log_y = true);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool log_x = false, bool log_y = false);

}  // namespace softchain
