#include "reluspline/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace reluspline {

namespace {

void check_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw std::invalid_argument(std::string("heatmap: non-finite ") + what);
    if (i > 0 && !(v[i] > v[i - 1])) {
      throw std::invalid_argument(std::string("heatmap: ") + what + " must be strictly increasing");
    }
  }
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string hex(const Rgb& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

}  // namespace

void HeatmapGrid::validate() const {
  if (row_labels.empty() || col_labels.empty()) throw std::invalid_argument("heatmap: empty grid");
  check_increasing(row_labels, "row labels");
  check_increasing(col_labels, "column labels");
  if (cells.size() != row_labels.size()) throw std::invalid_argument("heatmap: row count mismatch");
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (cells[r].size() != col_labels.size()) {
      throw std::invalid_argument("heatmap: row " + std::to_string(r) + " is not rectangular");
    }
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (!std::isfinite(cells[r][c])) {
        throw std::domain_error("heatmap: non-finite cell at row " + std::to_string(r) + ", column " +
                                std::to_string(c));
      }
    }
  }
  if (lo && !std::isfinite(*lo)) throw std::domain_error("heatmap: non-finite lower bound");
  if (hi && !std::isfinite(*hi)) throw std::domain_error("heatmap: non-finite upper bound");
  if (lo && hi && *lo > *hi) throw std::invalid_argument("heatmap: lower bound above upper bound");
}

double HeatmapGrid::min_cell() const {
  double m = cells.at(0).at(0);
  for (const auto& row : cells)
    for (double v : row) m = std::min(m, v);
  return m;
}

double HeatmapGrid::max_cell() const {
  double m = cells.at(0).at(0);
  for (const auto& row : cells)
    for (double v : row) m = std::max(m, v);
  return m;
}

CsvTable heatmap_csv(const HeatmapGrid& grid) {
  grid.validate();
  std::vector<std::string> header{grid.row_title};
  for (double c : grid.col_labels) header.push_back(format_double(c));
  CsvTable table(header);
  for (std::size_t r = 0; r < grid.row_labels.size(); ++r) {
    std::vector<std::string> row{format_double(grid.row_labels[r])};
    for (double v : grid.cells[r]) row.push_back(format_double(v));
    table.add_row(std::move(row));
  }
  return table;
}

HeatmapGrid parse_heatmap_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  HeatmapGrid grid;
  if (!std::getline(in, line)) throw std::invalid_argument("heatmap csv: empty input");
  const auto header = split(line, ',');
  if (header.size() < 2) throw std::invalid_argument("heatmap csv: need at least one column label");
  grid.row_title = header[0];
  for (std::size_t i = 1; i < header.size(); ++i) grid.col_labels.push_back(parse_double(header[i]));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw std::invalid_argument("heatmap csv: line " + std::to_string(line_no) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    }
    grid.row_labels.push_back(parse_double(cells[0]));
    std::vector<double> row;
    for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(parse_double(cells[i]));
    grid.cells.push_back(std::move(row));
  }
  grid.validate();
  return grid;
}

Rgb heat_color(double value, double lo, double hi) {
  double t = 0.5;
  if (hi > lo) t = std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255.0 * t));
  return {r, 0, 255 - r};
}

std::string render_heatmap(const HeatmapGrid& grid, const HeatmapStyle& style) {
  grid.validate();
  if (style.cell_width <= 0 || style.cell_height <= 0) {
    throw std::invalid_argument("heatmap: cell size must be positive");
  }
  const double lo = grid.lo.value_or(grid.min_cell());
  const double hi = grid.hi.value_or(grid.max_cell());
  const std::size_t rows = grid.row_labels.size();
  const std::size_t cols = grid.col_labels.size();
  const int left = 70;
  const int top = style.title.empty() ? 20 : 40;
  const int plot_w = static_cast<int>(cols) * style.cell_width;
  const int plot_h = static_cast<int>(rows) * style.cell_height;
  const int bottom = 60;
  const int right = 90;
  const int width = left + plot_w + right;
  const int height = top + plot_h + bottom;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<metadata>color_min=" << format_double(lo) << " color_max=" << format_double(hi)
      << " rows=" << rows << " cols=" << cols << "</metadata>\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"#ffffff\"/>\n";
  if (!style.title.empty()) {
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << xml_escape(style.title) << "</text>\n";
  }
  svg << "<g id=\"cells\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = grid.cells[r][c];
      svg << "<rect x=\"" << left + static_cast<int>(c) * style.cell_width << "\" y=\""
          << top + static_cast<int>(r) * style.cell_height << "\" width=\"" << style.cell_width
          << "\" height=\"" << style.cell_height << "\" fill=\"" << hex(heat_color(v, lo, hi))
          << "\"><title>" << format_double(v) << "</title></rect>\n";
    }
  }
  svg << "</g>\n";

  // Row labels on every row, column labels thinned to about 12.
  svg << "<g id=\"axes\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t r = 0; r < rows; ++r) {
    svg << "<text x=\"" << left - 4 << "\" y=\""
        << top + static_cast<int>(r) * style.cell_height + style.cell_height / 2 + 3
        << "\" text-anchor=\"end\">" << format_double(grid.row_labels[r]) << "</text>\n";
  }
  const std::size_t stride = std::max<std::size_t>(1, (cols + 11) / 12);
  for (std::size_t c = 0; c < cols; c += stride) {
    const int x = left + static_cast<int>(c) * style.cell_width + style.cell_width / 2;
    svg << "<text x=\"" << x << "\" y=\"" << top + plot_h + 14 << "\" text-anchor=\"middle\">"
        << format_double(grid.col_labels[c]) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << top + plot_h + 36
      << "\" text-anchor=\"middle\" font-size=\"12\">" << xml_escape(grid.col_title) << "</text>\n";
  svg << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 14 " << top + plot_h / 2 << ")\">" << xml_escape(grid.row_title)
      << "</text>\n";
  svg << "</g>\n";

  // Colour bar.
  const int bar_x = left + plot_w + 20;
  const int steps = 32;
  svg << "<g id=\"colorbar\" shape-rendering=\"crispEdges\">\n";
  for (int i = 0; i < steps; ++i) {
    const double t = 1.0 - (i + 0.5) / steps;
    const Rgb c = heat_color(lo + t * (hi - lo), lo, hi);
    svg << "<rect x=\"" << bar_x << "\" y=\"" << top + (plot_h * i) / steps << "\" width=\"12\" height=\""
        << (plot_h * (i + 1)) / steps - (plot_h * i) / steps << "\" fill=\"" << hex(c)
        << "\"/>\n";
  }
  svg << "</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"10\">\n";
  svg << "<text x=\"" << bar_x + 16 << "\" y=\"" << top + 8 << "\">" << format_double(hi) << "</text>\n";
  svg << "<text x=\"" << bar_x + 16 << "\" y=\"" << top + plot_h << "\">" << format_double(lo) << "</text>\n";
  svg << "</g>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace reluspline
