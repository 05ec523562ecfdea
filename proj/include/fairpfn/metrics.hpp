#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fairpfn {

struct AucResult {
  double value = 0.5;
  bool degenerate = false;  // single-class labels; value pinned to 0.5
};

/// Mann-Whitney rank AUC with midrank tie handling.
AucResult auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// |mean(pred_twin - pred_factual)|.
double tce(const std::vector<double>& pred_factual, const std::vector<double>& pred_twin);

/// Direct/indirect effects against path twins; absent twins yield absent
/// results, never zeros.
std::pair<std::optional<double>, std::optional<double>> de_ie(
    const std::vector<double>& pred_factual, const std::vector<double>* pred_direct_twin,
    const std::vector<double>* pred_indirect_twin);

/// Mean absolute difference between factual and twin predictions.
double cf_mae(const std::vector<double>& pred_factual, const std::vector<double>& pred_twin);

/// |mean score in group 1 - mean score in group 0|. Requires both groups.
double dp_gap(const std::vector<double>& scores, const std::vector<int>& groups);

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

/// Scores for one (dataset, method) evaluation.
struct EffectReport {
  double tce = 0.0;
  std::optional<double> de;
  std::optional<double> ie;
  double error = 0.5;  // 1 - AUC against observed labels
  bool error_degenerate = false;
  double cf_mae = 0.0;
  double dp_gap = 0.0;
  std::optional<double> auc_fair;  // AUC against fair labels, synthetic only
};

}  // namespace fairpfn
