#pragma once

#include <vector>

#include "fairpfn/tensor.hpp"

namespace fairpfn {

struct LogisticOptions {
  double l2 = 1e-4;        // on weights, not the intercept
  int max_iters = 500;
  double grad_tol = 1e-10;  // infinity norm
  double coef_cap = 50.0;   // clipped-margin guard for separable data
};

struct LogisticModel {
  std::vector<double> w;  // original (unstandardized) feature space
  double b = 0.0;
  bool clipped = false;

  double score(const double* x, i64 m) const;
  std::vector<double> score_rows(const Tensor& X) const;
};

/// Weighted binary cross-entropy minimized by full-batch gradient descent
/// with backtracking line search; gradients come from the autodiff graph.
/// Features are standardized internally and coefficients mapped back.
LogisticModel logistic_fit(const Tensor& X, const std::vector<int>& y,
                           const std::vector<double>& sample_weights = {},
                           const LogisticOptions& opts = {});

}  // namespace fairpfn
