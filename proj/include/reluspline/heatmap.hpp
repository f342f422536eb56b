#pragma once

// Size/epoch grids and their SVG rendering.

#include <optional>
#include <string>
#include <vector>

#include "reluspline/format.hpp"

namespace reluspline {

struct HeatmapGrid {
  std::vector<double> row_labels;  // dataset sizes, strictly increasing
  std::vector<double> col_labels;  // epochs, strictly increasing
  std::vector<std::vector<double>> cells;  // [row][col]
  std::optional<double> lo;  // explicit colour bounds; default min/max of cells
  std::optional<double> hi;
  std::string row_title = "n";
  std::string col_title = "epoch";

  void validate() const;
  double min_cell() const;
  double max_cell() const;
};

/// Header "<row_title>,<col label>...", one line per row.
CsvTable heatmap_csv(const HeatmapGrid& grid);
HeatmapGrid parse_heatmap_csv(const std::string& text);

struct Rgb {
  int r = 0;
  int g = 0;
  int b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Linear blue -> red over [lo, hi]; lo == hi gives the midpoint colour.
Rgb heat_color(double value, double lo, double hi);

struct HeatmapStyle {
  std::string title;
  int cell_width = 24;
  int cell_height = 24;
};

std::string render_heatmap(const HeatmapGrid& grid, const HeatmapStyle& style = {});

}  // namespace reluspline
