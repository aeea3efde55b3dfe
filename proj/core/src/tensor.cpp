#include "metaviewer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace metaviewer {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ", ")); }

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError(fmt::format("Tensor: shape {} needs {} values, got {}", shape_string(shape_),
                                 shape_numel(shape_), data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n == 0 ? 0 : rows.begin()->size();
  std::vector<double> flat;
  flat.reserve(n * m);
  for (const auto& r : rows) {
    if (r.size() != m) throw ShapeError("Tensor::matrix: ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor(Shape{n, m}, std::move(flat));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError(fmt::format("Tensor::item: expected one value, shape is {}", shape_string(shape_)));
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError(fmt::format("reshape: {} -> {}", shape_string(shape_), shape_string(shape)));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  if (rank() != 2) throw ShapeError(fmt::format("gather_rows: expected rank 2, got {}", shape_string(shape_)));
  const std::size_t cols = shape_[1];
  Tensor out(Shape{rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= shape_[0]) throw std::out_of_range(fmt::format("gather_rows: row {} of {}", rows[i], shape_[0]));
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * cols), cols,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  return out;
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t cols = shape_.at(1);
  return std::span<const double>(data_).subspan(r * cols, cols);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError(fmt::format("+=: {} vs {}", shape_string(shape_), shape_string(other.shape_)));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError(fmt::format("-=: {} vs {}", shape_string(shape_), shape_string(other.shape_)));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::l2_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

}  // namespace metaviewer
