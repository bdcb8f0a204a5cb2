#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace xbar {

/// Minimal dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) {
      throw std::invalid_argument("Matrix: negative dimensions");
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double &operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::vector<double> &data() { return data_; }
  const std::vector<double> &data() const { return data_; }

  bool same_shape(const Matrix &other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

} // namespace xbar
