#include "sus/mat.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sus/error.hpp"

namespace sus {

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Mat m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require(row.size() == c, ErrorKind::kDimension, "ragged row list");
    std::copy(row.begin(), row.end(), m.row(i).begin());
    ++i;
  }
  return m;
}

Mat Mat::from_flat(std::size_t rows, std::size_t cols, std::vector<double> data) {
  require(data.size() == rows * cols, ErrorKind::kDimension,
          "flat data length " + std::to_string(data.size()) + " does not match " +
              std::to_string(rows) + "x" + std::to_string(cols));
  Mat m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  return m;
}

bool Mat::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat& Mat::operator+=(const Mat& other) {
  require(same_shape(other), ErrorKind::kDimension, shape(*this) + " += " + shape(other));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Mat& Mat::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }

Mat operator-(Mat a, const Mat& b) {
  require(a.same_shape(b), ErrorKind::kDimension, shape(a) + " - " + shape(b));
  auto af = a.flat();
  auto bf = b.flat();
  for (std::size_t i = 0; i < af.size(); ++i) af[i] -= bf[i];
  return a;
}

Mat operator*(double s, Mat a) { return a *= s; }

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Mat matmul(const Mat& a, const Mat& b) {
  require(a.cols() == b.rows(), ErrorKind::kDimension, shape(a) + " * " + shape(b));
  Mat out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Mat matmul_tn(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows(), ErrorKind::kDimension, shape(a) + "^T * " + shape(b));
  Mat out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto orow = out.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
  require(a.cols() == b.cols(), ErrorKind::kDimension, shape(a) + " * " + shape(b) + "^T");
  Mat out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

Mat column_block(const Mat& a, std::size_t col0, std::size_t width) {
  require(col0 + width <= a.cols(), ErrorKind::kDimension, "column block out of range");
  Mat out(a.rows(), width);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = a(i, col0 + j);
  return out;
}

void set_column_block(Mat& dst, std::size_t col0, const Mat& block) {
  require(block.rows() == dst.rows() && col0 + block.cols() <= dst.cols(),
          ErrorKind::kDimension, "column block out of range");
  for (std::size_t i = 0; i < dst.rows(); ++i)
    for (std::size_t j = 0; j < block.cols(); ++j) dst(i, col0 + j) = block(i, j);
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.flat()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  require(a.same_shape(b), ErrorKind::kDimension, shape(a) + " vs " + shape(b));
  double m = 0.0;
  auto af = a.flat();
  auto bf = b.flat();
  for (std::size_t i = 0; i < af.size(); ++i) m = std::max(m, std::abs(af[i] - bf[i]));
  return m;
}

}  // namespace sus
