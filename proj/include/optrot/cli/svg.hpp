#pragma once

#include <string>
#include <vector>

namespace optrot::cli {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

// Static line-plot grid, panels filled row by row. Points that cannot be
// drawn on a log axis are skipped. Output depends only on the input.
std::string render_svg(const std::string& title, const std::vector<Panel>& panels,
                       std::size_t columns);

}  // namespace optrot::cli
