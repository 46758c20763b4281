#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace imface::diff {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major block of f64 values. The differentiation engine works on
/// rank-2 tensors (rows = samples, cols = features); other ranks are only
/// carried through serialization.
class Tensor {
 public:
  Tensor() : shape_{0, 0} {}
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape_{rows, cols}, data_(rows * cols, fill) {}
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::span<const double> values);
  static Tensor column(std::span<const double> values);
  static Tensor from_matrix(const RowMatrix& m);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const {
    if (shape_.size() != 2) throw_not_matrix();
    return shape_[0];
  }
  std::size_t cols() const {
    if (shape_.size() != 2) throw_not_matrix();
    return shape_[1];
  }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.back() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.back() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  MatrixMap matrix();
  ConstMatrixMap matrix() const;

  Tensor reshaped(std::size_t rows, std::size_t cols) const;
  bool all_finite() const;
  double item() const;

  std::string shape_string() const;

 private:
  [[noreturn]] void throw_not_matrix() const;
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace imface::diff
