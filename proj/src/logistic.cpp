#include "fairpfn/logistic.hpp"

#include <cmath>
#include <stdexcept>

#include "fairpfn/graph.hpp"

namespace fairpfn {

double LogisticModel::score(const double* x, i64 m) const {
  if (static_cast<std::size_t>(m) != w.size())
    throw std::invalid_argument("LogisticModel::score: feature count mismatch");
  double z = b;
  for (i64 j = 0; j < m; ++j) z += w[static_cast<std::size_t>(j)] * x[j];
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<double> LogisticModel::score_rows(const Tensor& X) const {
  std::vector<double> out(static_cast<std::size_t>(X.rows()));
  for (i64 i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = score(X.data() + i * X.cols(), X.cols());
  return out;
}

namespace {

struct Standardized {
  Tensor X;
  std::vector<double> mean, sd;
};

Standardized standardize(const Tensor& X, const std::vector<double>& w, double wsum) {
  const i64 n = X.rows(), m = X.cols();
  Standardized s;
  s.mean.assign(static_cast<std::size_t>(m), 0.0);
  s.sd.assign(static_cast<std::size_t>(m), 1.0);
  for (i64 j = 0; j < m; ++j) {
    double mu = 0.0;
    for (i64 i = 0; i < n; ++i) mu += w[static_cast<std::size_t>(i)] * X.at(i, j);
    mu /= wsum;
    double var = 0.0;
    for (i64 i = 0; i < n; ++i) {
      const double d = X.at(i, j) - mu;
      var += w[static_cast<std::size_t>(i)] * d * d;
    }
    var /= wsum;
    s.mean[static_cast<std::size_t>(j)] = mu;
    s.sd[static_cast<std::size_t>(j)] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  s.X = Tensor::zeros({n, m});
  for (i64 i = 0; i < n; ++i)
    for (i64 j = 0; j < m; ++j)
      s.X.at(i, j) = (X.at(i, j) - s.mean[static_cast<std::size_t>(j)]) /
                     s.sd[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace

LogisticModel logistic_fit(const Tensor& X, const std::vector<int>& y,
                           const std::vector<double>& sample_weights,
                           const LogisticOptions& opts) {
  const i64 n = X.rows(), m = X.cols();
  if (n < 2) throw std::invalid_argument("logistic_fit: need n >= 2");
  if (static_cast<i64>(y.size()) != n) throw std::invalid_argument("logistic_fit: label count");
  std::vector<double> w = sample_weights;
  if (w.empty()) w.assign(static_cast<std::size_t>(n), 1.0);
  if (static_cast<i64>(w.size()) != n)
    throw std::invalid_argument("logistic_fit: weight count mismatch");
  double wsum = 0.0, wpos = 0.0;
  for (i64 i = 0; i < n; ++i) {
    if (w[static_cast<std::size_t>(i)] < 0.0)
      throw std::invalid_argument("logistic_fit: negative weight");
    wsum += w[static_cast<std::size_t>(i)];
    if (y[static_cast<std::size_t>(i)]) wpos += w[static_cast<std::size_t>(i)];
  }
  if (wsum <= 0.0 || wpos <= 0.0 || wpos >= wsum)
    throw std::invalid_argument("logistic_fit: both classes must carry weight");

  const Standardized s = standardize(X, w, wsum);
  Tensor labels = Tensor::zeros({n, 1});
  for (i64 i = 0; i < n; ++i) labels[i] = y[static_cast<std::size_t>(i)];
  Tensor weights = Tensor::zeros({n, 1});
  for (i64 i = 0; i < n; ++i) weights[i] = w[static_cast<std::size_t>(i)];

  Tensor theta_w = Tensor::zeros({m, 1});
  Tensor theta_b = Tensor::zeros({1, 1});

  auto loss_and_grad = [&](const Tensor& tw, const Tensor& tb, Tensor* gw, Tensor* gb) {
    Graph g;
    const Var wv = g.param(tw, "w");
    const Var bv = g.param(tb, "b");
    const Var logits = g.add_rows(g.matmul(g.value(s.X), wv), bv);
    Var loss = g.bce_with_logits(logits, labels, &weights);
    if (opts.l2 > 0.0) loss = g.add(loss, g.scale(g.sum_all(g.square(wv)), opts.l2));
    const double lv = g.val(loss)[0];
    if (gw) {
      g.backward(loss);
      *gw = g.grad(wv);
      *gb = g.grad(bv);
    }
    return lv;
  };

  double loss = 0.0;
  Tensor gw, gb;
  loss = loss_and_grad(theta_w, theta_b, &gw, &gb);
  for (int it = 0; it < opts.max_iters; ++it) {
    double gmax = std::fabs(gb[0]), gnorm2 = gb[0] * gb[0];
    for (i64 j = 0; j < m; ++j) {
      gmax = std::max(gmax, std::fabs(gw[j]));
      gnorm2 += gw[j] * gw[j];
    }
    if (gmax < opts.grad_tol) break;

    double step = 1.0;
    Tensor cand_w = theta_w, cand_b = theta_b;
    double cand_loss = loss;
    while (step > 1e-14) {
      for (i64 j = 0; j < m; ++j) cand_w[j] = theta_w[j] - step * gw[j];
      cand_b[0] = theta_b[0] - step * gb[0];
      cand_loss = loss_and_grad(cand_w, cand_b, nullptr, nullptr);
      if (cand_loss <= loss - 1e-4 * step * gnorm2) break;
      step *= 0.5;
    }
    theta_w = cand_w;
    theta_b = cand_b;
    loss = loss_and_grad(theta_w, theta_b, &gw, &gb);
  }

  LogisticModel model;
  model.w.resize(static_cast<std::size_t>(m));
  model.b = theta_b[0];
  for (i64 j = 0; j < m; ++j) {
    model.w[static_cast<std::size_t>(j)] = theta_w[j] / s.sd[static_cast<std::size_t>(j)];
    model.b -= theta_w[j] * s.mean[static_cast<std::size_t>(j)] / s.sd[static_cast<std::size_t>(j)];
  }
  double wmax = 0.0;
  for (double c : model.w) wmax = std::max(wmax, std::fabs(c));
  if (wmax > opts.coef_cap) {
    const double shrink = opts.coef_cap / wmax;
    for (double& c : model.w) c *= shrink;
    model.b *= shrink;
    model.clipped = true;
  }
  return model;
}

}  // namespace fairpfn
