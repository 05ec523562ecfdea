#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fairpfn {

using i64 = std::int64_t;

/// Dense row-major tensor of doubles. Rank 1 and 2 cover everything here;
/// higher ranks are allowed but no op requires them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<i64> shape);
  static Tensor full(std::vector<i64> shape, double v);
  static Tensor from(std::vector<i64> shape, std::vector<double> data);
  static Tensor scalar(double v) { return from({1}, {v}); }
  static Tensor row(std::vector<double> data);     // 1 x n
  static Tensor column(std::vector<double> data);  // n x 1

  const std::vector<i64>& shape() const { return shape_; }
  i64 size() const { return static_cast<i64>(data_.size()); }
  int rank() const { return static_cast<int>(shape_.size()); }
  i64 dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

  /// Rows/cols of a rank-2 tensor (rank-1 is treated as a single row).
  i64 rows() const;
  i64 cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](i64 i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](i64 i) const { return data_[static_cast<std::size_t>(i)]; }
  double& at(i64 r, i64 c) { return data_[static_cast<std::size_t>(r * cols() + c)]; }
  double at(i64 r, i64 c) const { return data_[static_cast<std::size_t>(r * cols() + c)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_str() const;

  const std::vector<double>& vec() const { return data_; }

 private:
  Tensor(std::vector<i64> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<i64> shape_;
  std::vector<double> data_;
};

/// c = a * b for rank-2 tensors, accumulating into a preallocated output.
/// Backed by BLAS dgemm when available.
void matmul_into(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                 double beta = 0.0);

}  // namespace fairpfn
