#include "fairpfn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairpfn {

AucResult auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: length mismatch");
  if (scores.empty()) throw std::invalid_argument("auc: empty input");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y ? 1 : 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return {0.5, true};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks over tie groups, ranks are 1-based
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (labels[k]) rank_sum_pos += rank[k];
  const double u = rank_sum_pos - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
  return {u / (static_cast<double>(pos) * static_cast<double>(neg)), false};
}

double tce(const std::vector<double>& pred_factual, const std::vector<double>& pred_twin) {
  if (pred_factual.size() != pred_twin.size()) throw std::invalid_argument("tce: length mismatch");
  if (pred_factual.empty()) throw std::invalid_argument("tce: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_factual.size(); ++i) s += pred_twin[i] - pred_factual[i];
  return std::fabs(s / static_cast<double>(pred_factual.size()));
}

std::pair<std::optional<double>, std::optional<double>> de_ie(
    const std::vector<double>& pred_factual, const std::vector<double>* pred_direct_twin,
    const std::vector<double>* pred_indirect_twin) {
  std::optional<double> de, ie;
  if (pred_direct_twin) de = tce(pred_factual, *pred_direct_twin);
  if (pred_indirect_twin) ie = tce(pred_factual, *pred_indirect_twin);
  return {de, ie};
}

double cf_mae(const std::vector<double>& pred_factual, const std::vector<double>& pred_twin) {
  if (pred_factual.size() != pred_twin.size())
    throw std::invalid_argument("cf_mae: length mismatch");
  if (pred_factual.empty()) throw std::invalid_argument("cf_mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < pred_factual.size(); ++i)
    s += std::fabs(pred_twin[i] - pred_factual[i]);
  return s / static_cast<double>(pred_factual.size());
}

double dp_gap(const std::vector<double>& scores, const std::vector<int>& groups) {
  if (scores.size() != groups.size()) throw std::invalid_argument("dp_gap: length mismatch");
  double s0 = 0.0, s1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (groups[i]) {
      s1 += scores[i];
      ++n1;
    } else {
      s0 += scores[i];
      ++n0;
    }
  }
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("dp_gap: a group is missing");
  return std::fabs(s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0));
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson_corr: need two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace fairpfn
