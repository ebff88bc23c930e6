#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace sus {

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat from_flat(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool same_shape(const Mat& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;

  Mat& operator+=(const Mat& other);
  Mat& operator*=(double s);

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(double s, Mat a);

Mat transpose(const Mat& a);
// a * b
Mat matmul(const Mat& a, const Mat& b);
// a^T * b
Mat matmul_tn(const Mat& a, const Mat& b);
// a * b^T
Mat matmul_nt(const Mat& a, const Mat& b);

// Copy of columns [col0, col0 + width).
Mat column_block(const Mat& a, std::size_t col0, std::size_t width);
void set_column_block(Mat& dst, std::size_t col0, const Mat& block);

double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);

}  // namespace sus
