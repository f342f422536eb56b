#pragma once

// Text helpers shared by every file writer: floats always go out with 17
// significant digits so a write/read cycle reproduces the exact double.

#include <string>
#include <string_view>
#include <vector>

namespace reluspline {

std::string format_double(double value);

/// Strict parse of a whole token; throws std::invalid_argument otherwise.
double parse_double(std::string_view token);

/// Minimal comma-separated writer. Rows are built in memory and written in
/// one go, so a failed run never leaves a half-written file behind.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::string& path) const;

  std::size_t row_count() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes `contents` to `path`, throwing std::runtime_error on failure.
void write_text_file(const std::string& path, const std::string& contents);
std::string read_text_file(const std::string& path);

}  // namespace reluspline
