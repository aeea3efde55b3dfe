#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaviewer {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Raised when operand shapes do not conform. The message names the op and
/// every offending shape.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a forward value or a loss stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major array of doubles. A rank-0 tensor (empty shape) holds a
/// single scalar.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // rank-2 accessors
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  double item() const;
  bool all_finite() const;

  Tensor reshaped(Shape shape) const;
  /// Rows of a rank-2 tensor, in the given order.
  Tensor gather_rows(std::span<const std::size_t> rows) const;
  std::span<const double> row(std::size_t r) const;

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double s);

  double max_abs() const;
  double l2_norm() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);

}  // namespace metaviewer
