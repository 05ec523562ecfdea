#include "fairpfn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fairpfn/metrics.hpp"
#include "fairpfn/rng.hpp"

namespace fairpfn {

std::string baseline_method_id(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kUnfair: return "unfair";
    case BaselineKind::kUnaware: return "unaware";
    case BaselineKind::kConstant: return "constant";
    case BaselineKind::kRandom: return "random";
    case BaselineKind::kLevelOne: return "level1";
    case BaselineKind::kLevelTwo: return "level2";
    case BaselineKind::kLevelThree: return "level3";
    case BaselineKind::kEgr: return "egr";
  }
  throw std::logic_error("baseline_method_id: bad kind");
}

BaselineKind baseline_from_id(const std::string& id) {
  for (BaselineKind k : all_baselines())
    if (baseline_method_id(k) == id) return k;
  throw std::invalid_argument("unknown baseline: " + id);
}

const std::vector<BaselineKind>& all_baselines() {
  static const std::vector<BaselineKind> kinds = {
      BaselineKind::kUnfair,   BaselineKind::kUnaware,  BaselineKind::kConstant,
      BaselineKind::kRandom,   BaselineKind::kLevelOne, BaselineKind::kLevelTwo,
      BaselineKind::kLevelThree, BaselineKind::kEgr};
  return kinds;
}

std::vector<int> level_columns(BaselineKind kind, const FairInfo& info) {
  std::vector<int> cols;
  for (std::size_t j = 0; j < info.columns.size(); ++j) {
    const std::string& name = info.columns[j];
    const bool nd = name.rfind("nd_", 0) == 0;
    const bool u = name.rfind("u_", 0) == 0;
    const bool eps = name.rfind("eps_", 0) == 0;
    const bool take = (kind == BaselineKind::kLevelOne && nd) ||
                      (kind == BaselineKind::kLevelTwo && (nd || u)) ||
                      (kind == BaselineKind::kLevelThree && (nd || u || eps));
    if (take) cols.push_back(static_cast<int>(j));
  }
  return cols;
}

namespace {

Tensor with_protected(const Dataset& d) {
  Tensor out = Tensor::zeros({d.n(), d.m() + 1});
  for (i64 i = 0; i < d.n(); ++i) {
    out.at(i, 0) = d.groups[static_cast<std::size_t>(i)];
    for (i64 j = 0; j < d.m(); ++j) out.at(i, j + 1) = d.features.at(i, j);
  }
  return out;
}

Tensor select_columns(const FairInfo& info, const std::vector<int>& cols) {
  const i64 n = info.values.rank() == 2 ? info.values.rows()
                                        : static_cast<i64>(info.y_fair.size());
  Tensor out = Tensor::zeros({n, static_cast<i64>(cols.size())});
  for (i64 i = 0; i < n; ++i)
    for (std::size_t c = 0; c < cols.size(); ++c)
      out.at(i, static_cast<i64>(c)) = info.values.at(i, cols[c]);
  return out;
}

}  // namespace

std::vector<double> RandomizedClassifier::score_rows(const Tensor& X) const {
  std::vector<double> out(static_cast<std::size_t>(X.rows()), 0.0);
  for (const auto& [weight, model] : members) {
    const std::vector<double> s = model.score_rows(X);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * s[i];
  }
  return out;
}

void egr_multiplier_update(double& lambda_pos, double& lambda_neg, double gap, double eps,
                           double eta, double bound) {
  lambda_pos *= std::exp(eta * (gap - eps));
  lambda_neg *= std::exp(eta * (-gap - eps));
  const double total = lambda_pos + lambda_neg;
  if (total > bound) {
    lambda_pos *= bound / total;
    lambda_neg *= bound / total;
  }
}

RandomizedClassifier egr_fit(const Tensor& X, const std::vector<int>& groups,
                             const std::vector<int>& y, double eps, int max_iters, double eta,
                             double bound, const LogisticOptions& opts) {
  const i64 n = X.rows();
  if (static_cast<i64>(groups.size()) != n || static_cast<i64>(y.size()) != n)
    throw std::invalid_argument("egr_fit: length mismatch");
  i64 n1 = 0, npos = 0;
  for (i64 i = 0; i < n; ++i) {
    n1 += groups[static_cast<std::size_t>(i)];
    npos += y[static_cast<std::size_t>(i)];
  }
  const i64 n0 = n - n1;
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("egr_fit: need both groups");
  if (npos == 0 || npos == n) throw std::invalid_argument("egr_fit: need both classes");

  const double base_rate = static_cast<double>(npos) / static_cast<double>(n);
  auto gap_of = [&](const std::vector<double>& scores) {
    double s0 = 0, s1 = 0;
    for (i64 i = 0; i < n; ++i)
      (groups[static_cast<std::size_t>(i)] ? s1 : s0) += scores[static_cast<std::size_t>(i)];
    return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
  };
  auto err_of = [&](const std::vector<double>& scores) {
    double e = 0;
    for (i64 i = 0; i < n; ++i)
      e += y[static_cast<std::size_t>(i)] ? 1.0 - scores[static_cast<std::size_t>(i)]
                                          : scores[static_cast<std::size_t>(i)];
    return e / static_cast<double>(n);
  };

  double lambda_pos = 1.0, lambda_neg = 1.0;
  RandomizedClassifier rc;
  std::vector<double> avg(static_cast<std::size_t>(n), 0.0);
  std::vector<std::vector<double>> member_scores;
  double best_key = 1e300;
  int best_t = 0;

  for (int t = 1; t <= max_iters; ++t) {
    // cost-sensitive reduction: per-sample signed cost of predicting 1
    const double ldiff = lambda_pos - lambda_neg;
    std::vector<int> pseudo(static_cast<std::size_t>(n));
    std::vector<double> weights(static_cast<std::size_t>(n));
    double dual_min = 0.0;
    for (i64 i = 0; i < n; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      const double d_i = groups[k] ? 1.0 / static_cast<double>(n1)
                                   : -1.0 / static_cast<double>(n0);
      const double cost = (1.0 - 2.0 * static_cast<double>(y[k])) / static_cast<double>(n) +
                          ldiff * d_i;
      pseudo[k] = cost < 0.0 ? 1 : 0;
      weights[k] = std::fabs(cost) * static_cast<double>(n);
      dual_min += std::min(0.0, cost);
    }

    LogisticModel h;
    bool fitted = false;
    double wpos = 0, wsum = 0;
    for (i64 i = 0; i < n; ++i) {
      wsum += weights[static_cast<std::size_t>(i)];
      if (pseudo[static_cast<std::size_t>(i)]) wpos += weights[static_cast<std::size_t>(i)];
    }
    if (wsum > 1e-12 && wpos > 1e-12 && wpos < wsum - 1e-12) {
      h = logistic_fit(X, pseudo, weights, opts);
      fitted = true;
    } else {
      // degenerate costs: constant best response
      h.w.assign(static_cast<std::size_t>(X.cols()), 0.0);
      const double target = wpos > 0.5 * wsum ? 1.0 - 1e-6 : (npos > 0 ? base_rate : 1e-6);
      h.b = std::log(target / (1.0 - target));
    }
    (void)fitted;

    rc.members.emplace_back(0.0, h);
    rc.member_seeds.push_back(static_cast<std::uint64_t>(t));
    member_scores.push_back(h.score_rows(X));
    for (i64 i = 0; i < n; ++i)
      avg[static_cast<std::size_t>(i)] =
          (avg[static_cast<std::size_t>(i)] * (t - 1) + member_scores.back()[static_cast<std::size_t>(i)]) / t;

    const double gap = gap_of(avg);
    const double err = err_of(avg);
    const double viol = std::max(gap - eps, -gap - eps);
    const double key = viol > 0 ? 1.0 + viol : err;
    if (key < best_key) {
      best_key = key;
      best_t = t;
    }

    // duality gap of the current pair (averaged primal, exact dual response)
    const double primal = err + bound * std::max(0.0, viol);
    const double dual = base_rate - eps * (lambda_pos + lambda_neg) + dual_min;
    rc.iterations = t;
    if (primal - dual < 0.5 * eps) {
      rc.converged = true;
      best_t = t;
      break;
    }

    egr_multiplier_update(lambda_pos, lambda_neg, gap, eps, eta, bound);
  }

  rc.members.resize(static_cast<std::size_t>(best_t));
  rc.member_seeds.resize(static_cast<std::size_t>(best_t));
  for (auto& [weight, model] : rc.members) weight = 1.0 / static_cast<double>(best_t);
  return rc;
}

BaselineScores fit_predict(const BaselineSpec& spec, const Dataset& factual, const Dataset* cf,
                           const Dataset* direct, const Dataset* indirect,
                           const FairInfo* fair_info, const ModelParams* pfn_unfair_params) {
  BaselineScores out;
  const i64 n = factual.n();
  const auto score_const = [&](double v) {
    out.factual.assign(static_cast<std::size_t>(n), v);
    if (cf) out.cf.assign(static_cast<std::size_t>(cf->n()), v);
    if (direct) out.direct.assign(static_cast<std::size_t>(direct->n()), v);
    if (indirect) out.indirect.assign(static_cast<std::size_t>(indirect->n()), v);
  };

  switch (spec.kind) {
    case BaselineKind::kConstant: {
      double rate = 0.0;
      for (int yv : factual.labels) rate += yv;
      rate /= static_cast<double>(n);
      score_const(rate);
      return out;
    }
    case BaselineKind::kRandom: {
      auto fill = [&](std::vector<double>& dst, i64 rows, std::uint64_t stream) {
        Rng r = Rng(spec.seed).fork(stream);
        dst.resize(static_cast<std::size_t>(rows));
        for (auto& v : dst) v = r.uniform();
      };
      fill(out.factual, n, 1);
      if (cf) fill(out.cf, cf->n(), 2);
      if (direct) fill(out.direct, direct->n(), 3);
      if (indirect) fill(out.indirect, indirect->n(), 4);
      return out;
    }
    case BaselineKind::kLevelOne:
    case BaselineKind::kLevelTwo:
    case BaselineKind::kLevelThree: {
      if (!fair_info) {
        out.applicable = false;
        return out;
      }
      const std::vector<int> cols = level_columns(spec.kind, *fair_info);
      if (cols.empty()) {
        out.applicable = false;  // appendix applicability: no oracle inputs here
        return out;
      }
      const Tensor Xo = select_columns(*fair_info, cols);
      const LogisticModel model = logistic_fit(Xo, factual.labels, {}, spec.logistic);
      const std::vector<double> scores = model.score_rows(Xo);
      out.factual = scores;
      // oracle columns are untouched by any protected flip
      if (cf) out.cf = scores;
      if (direct) out.direct = scores;
      if (indirect) out.indirect = scores;
      return out;
    }
    case BaselineKind::kUnfair:
    case BaselineKind::kUnaware: {
      const bool with_a = spec.kind == BaselineKind::kUnfair;
      auto design = [&](const Dataset& d) { return with_a ? with_protected(d) : d.features; };
      if (spec.base_learner == "pfn-unfair") {
        if (!pfn_unfair_params)
          throw std::invalid_argument("fit_predict: pfn-unfair learner needs a checkpoint");
        if (!with_a)
          throw std::invalid_argument("fit_predict: pfn-unfair learner only backs `unfair`");
        auto run = [&](const Dataset& d) {
          return predict(*pfn_unfair_params, factual.groups, factual.features, factual.labels,
                         d.groups, d.features);
        };
        out.factual = run(factual);
        if (cf) out.cf = run(*cf);
        if (direct) out.direct = run(*direct);
        if (indirect) out.indirect = run(*indirect);
        return out;
      }
      const LogisticModel model = logistic_fit(design(factual), factual.labels, {}, spec.logistic);
      out.factual = model.score_rows(design(factual));
      if (cf) out.cf = model.score_rows(design(*cf));
      if (direct) out.direct = model.score_rows(design(*direct));
      if (indirect) out.indirect = model.score_rows(design(*indirect));
      return out;
    }
    case BaselineKind::kEgr: {
      const RandomizedClassifier rc =
          egr_fit(with_protected(factual), factual.groups, factual.labels, spec.egr_eps,
                  spec.egr_iters, spec.egr_eta, spec.egr_bound, spec.logistic);
      out.factual = rc.score_rows(with_protected(factual));
      if (cf) out.cf = rc.score_rows(with_protected(*cf));
      if (direct) out.direct = rc.score_rows(with_protected(*direct));
      if (indirect) out.indirect = rc.score_rows(with_protected(*indirect));
      return out;
    }
  }
  throw std::logic_error("fit_predict: bad kind");
}

}  // namespace fairpfn
