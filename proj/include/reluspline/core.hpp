#pragma once

// Numeric substrate shared by every other module: a dense row-major matrix of
// doubles, a seedable random stream, and the few elementwise primitives the
// network needs.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reluspline {

/// Thrown when operand shapes do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or infinity reaches an operation that refuses it.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of row-major `data`; throws ShapeError on a length
  /// mismatch and NonFiniteError on any non-finite entry.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  /// n×1 column built from a plain vector.
  static Matrix column(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  std::string shape_string() const;
  bool all_finite() const;

  /// New matrix holding the listed rows, in order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Seeded stream of random numbers.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Doubles are formed from the top 53 bits of each draw and
/// Gaussians come from Box–Muller, so the whole stream depends only on the
/// seed. Streams are single-owner; derive trial streams as `seed + trial`.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double next_unit();
  /// Uniform on [0, n); rejection sampling, no modulo bias.
  std::size_t next_index(std::size_t n);
  /// One standard normal pair from Box–Muller.
  std::pair<double, double> next_normal_pair();

  /// Fisher–Yates shuffle driven by next_index.
  void shuffle(std::span<std::size_t> values);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix relu(const Matrix& m);

/// i.i.d. N(0, 1) entries filled row-major from consecutive Box–Muller pairs.
/// With an odd entry count the second value of the final pair is dropped.
Matrix standard_normal(RngStream& rng, std::size_t rows, std::size_t cols);

/// i.i.d. uniform entries on [lo, hi).
Matrix uniform(RngStream& rng, double lo, double hi, std::size_t rows, std::size_t cols);

/// Throws NonFiniteError naming `what` if any entry is NaN or infinite.
void require_finite(std::span<const double> values, const std::string& what);

}  // namespace reluspline
