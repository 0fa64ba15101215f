#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace kopa {

/// Row-major dense matrix of doubles.
///
/// Every matrix in the library (observations, Kronecker factors, noise,
/// rearranged matrices) is carried by this type. Construction checks that
/// the buffer length matches the shape and that every entry is finite;
/// element mutation through operator() is unchecked.
class DenseMatrix {
 public:
  /// Zero-filled rows x cols matrix. Both dimensions must be positive.
  DenseMatrix(std::size_t rows, std::size_t cols);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix column(std::span<const double> values);
  static DenseMatrix row(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> row_span(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  double frobenius_norm2() const noexcept;
  double frobenius_norm() const noexcept;
  double sum() const noexcept;
  double max_abs() const noexcept;

  DenseMatrix transpose() const;

  DenseMatrix& operator+=(const DenseMatrix& other);
  DenseMatrix& operator-=(const DenseMatrix& other);
  DenseMatrix& operator*=(double s) noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b);
DenseMatrix operator*(double s, DenseMatrix a);

/// Ordinary matrix product.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Largest absolute entrywise difference; shapes must agree.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double norm2(std::span<const double> a) noexcept;

}  // namespace kopa
