#include "imface/diffcore/tensor.hpp"

#include "imface/error.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace imface::diff {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (expected != data_.size()) {
    throw Error(ErrorKind::dimension, "tensor value count " + std::to_string(data_.size()) +
                                          " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorKind::dimension, "ragged tensor literal");
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  Tensor t(1, values.size());
  std::copy(values.begin(), values.end(), t.data_.begin());
  return t;
}

Tensor Tensor::column(std::span<const double> values) {
  Tensor t(values.size(), 1);
  std::copy(values.begin(), values.end(), t.data_.begin());
  return t;
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  t.matrix() = m;
  return t;
}

void Tensor::throw_not_matrix() const {
  throw Error(ErrorKind::dimension, "expected rank-2 tensor, got " + shape_string());
}

MatrixMap Tensor::matrix() {
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatrixMap Tensor::matrix() const {
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                        static_cast<Eigen::Index>(cols()));
}

Tensor Tensor::reshaped(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw Error(ErrorKind::dimension, "cannot reshape " + shape_string() + " to (" +
                                          std::to_string(rows) + ", " + std::to_string(cols) + ")");
  }
  Tensor t;
  t.shape_ = {rows, cols};
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (data_.size() != 1) throw Error(ErrorKind::dimension, "item() on tensor of shape " + shape_string());
  return data_[0];
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape_[i]);
  }
  return s + ")";
}

}  // namespace imface::diff
