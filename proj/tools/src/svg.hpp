#pragma once

// Minimal self-contained SVG line charts for the report command.

#include <string>
#include <vector>

namespace aggload::tools {

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string label;
  std::string color;   // empty: pick from the default palette
  bool dashed = false;
};

// Writes a single line chart; non-finite points break the polyline.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series);

}  // namespace aggload::tools
