#include "fairpfn/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#ifdef FAIRPFN_HAVE_OPENBLAS
#include <cblas.h>
#endif

namespace fairpfn {

namespace {

i64 shape_size(const std::vector<i64>& shape) {
  i64 n = 1;
  for (i64 d : shape) {
    if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
    n *= d;
  }
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<i64> shape) {
  const i64 n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<i64> shape, double v) {
  const i64 n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::from(std::vector<i64> shape, std::vector<double> data) {
  if (shape_size(shape) != static_cast<i64>(data.size()))
    throw std::invalid_argument("Tensor: element count does not match shape");
  return Tensor(std::move(shape), std::move(data));
}

Tensor Tensor::row(std::vector<double> data) {
  const i64 n = static_cast<i64>(data.size());
  return Tensor({1, n}, std::move(data));
}

Tensor Tensor::column(std::vector<double> data) {
  const i64 n = static_cast<i64>(data.size());
  return Tensor({n, 1}, std::move(data));
}

i64 Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw std::logic_error("Tensor::rows: rank > 2");
}

i64 Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw std::logic_error("Tensor::cols: rank > 2");
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (auto& x : data_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << "x";
    os << shape_[i];
  }
  os << ")";
  return os.str();
}

void matmul_into(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& c,
                 double beta) {
  const i64 m = trans_a ? a.cols() : a.rows();
  const i64 k = trans_a ? a.rows() : a.cols();
  const i64 kb = trans_b ? b.cols() : b.rows();
  const i64 n = trans_b ? b.rows() : b.cols();
  if (k != kb)
    throw std::invalid_argument("matmul: inner dimensions differ, " + a.shape_str() +
                                (trans_a ? "^T" : "") + " * " + b.shape_str() +
                                (trans_b ? "^T" : ""));
  if (c.rows() != m || c.cols() != n) throw std::invalid_argument("matmul: bad output shape");
#ifdef FAIRPFN_HAVE_OPENBLAS
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), 1.0, a.data(), static_cast<int>(a.cols()), b.data(),
              static_cast<int>(b.cols()), beta, c.data(), static_cast<int>(c.cols()));
#else
  // plain triple loop, ikj order for row-major locality
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const i64 lda = a.cols(), ldb = b.cols(), ldc = c.cols();
  if (beta == 0.0) c.fill(0.0);
  else if (beta != 1.0)
    for (i64 i = 0; i < m * n; ++i) pc[i] *= beta;
  for (i64 i = 0; i < m; ++i) {
    for (i64 l = 0; l < k; ++l) {
      const double av = trans_a ? pa[l * lda + i] : pa[i * lda + l];
      if (av == 0.0) continue;
      if (!trans_b) {
        const double* brow = pb + l * ldb;
        double* crow = pc + i * ldc;
        for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        double* crow = pc + i * ldc;
        for (i64 j = 0; j < n; ++j) crow[j] += av * pb[j * ldb + l];
      }
    }
  }
#endif
}

}  // namespace fairpfn
