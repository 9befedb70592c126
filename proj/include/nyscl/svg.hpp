#pragma once

#include <string>
#include <vector>

namespace nyscl {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;  // optional; empty or same length as y
  std::vector<double> band_hi;
};

/// Standalone SVG 1.1 line chart: axes, one polyline per series and a
/// translucent band polygon where bands are given.
std::string line_chart_svg(const std::vector<SvgSeries>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           bool log_x = false);

}  // namespace nyscl
