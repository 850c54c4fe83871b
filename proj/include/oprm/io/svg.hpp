#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oprm::io {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log2_x = false;
  /// Fixed y range; when lo == hi the range is fitted to the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
};

/// Self-contained SVG line chart. Every data point becomes one
/// `<circle class="point">` carrying `data-series`, `data-x` and `data-y`.
void line_chart(std::ostream& out, const ChartSpec& spec, const std::vector<Series>& series);

/// Bar chart of `values` with one `<rect class="bar">` per entry.
void bar_chart(std::ostream& out, const ChartSpec& spec, const std::vector<std::string>& labels,
               const std::vector<double>& values);

}  // namespace oprm::io
