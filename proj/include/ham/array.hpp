#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ham/errors.hpp"

namespace ham {

// Dense row-major double tensor. Rank 1..3 is what the models use; rank 2 is
// the workhorse (sequences as rows, channels as columns).
class Array {
 public:
  Array() = default;

  explicit Array(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), 0.0);
  }

  Array(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw ShapeError("array data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
    }
  }

  static Array zeros(std::vector<int> shape) { return Array(std::move(shape)); }

  static Array zeros_like(const Array& other) { return Array(other.shape_); }

  static Array full(std::vector<int> shape, double v) {
    Array a(std::move(shape));
    a.fill(v);
    return a;
  }

  static Array scalar(double v) { return Array({1}, {v}); }

  int ndim() const { return static_cast<int>(shape_.size()); }

  const std::vector<int>& shape() const { return shape_; }

  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

  int rows() const {
    require_rank(2, "rows()");
    return shape_[0];
  }

  int cols() const {
    require_rank(2, "cols()");
    return shape_[1];
  }

  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(int r, int c) {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
  }
  double at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * shape_[1] + c];
  }

  // Rank-3 accessor, layout (d0, d1, d2) row-major.
  double& at(int a, int b, int c) {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }
  double at(int a, int b, int c) const {
    return data_[(static_cast<std::size_t>(a) * shape_[1] + b) * shape_[2] + c];
  }

  double item() const {
    if (data_.size() != 1) {
      throw ShapeError("item() called on non-scalar array of shape " +
                       shape_to_string(shape_));
    }
    return data_[0];
  }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  std::string shape_str() const { return shape_to_string(shape_); }

  static std::string shape_to_string(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += "x";
      out += std::to_string(s[i]);
    }
    out += "]";
    return out;
  }

 private:
  static std::size_t count(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
      if (d < 0) throw ShapeError("negative dimension in " + shape_to_string(shape));
      n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
  }

  void require_rank(int r, const char* what) const {
    if (ndim() != r) {
      throw ShapeError(std::string(what) + " requires rank " + std::to_string(r) +
                       " array, got shape " + shape_str());
    }
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline void check_same_shape(const char* op, const Array& a, const Array& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

}  // namespace ham
