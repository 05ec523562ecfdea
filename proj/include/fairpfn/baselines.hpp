#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpfn/casebench.hpp"
#include "fairpfn/dataset.hpp"
#include "fairpfn/logistic.hpp"
#include "fairpfn/model.hpp"

namespace fairpfn {

enum class BaselineKind {
  kUnfair,
  kUnaware,
  kConstant,
  kRandom,
  kLevelOne,
  kLevelTwo,
  kLevelThree,
  kEgr,
};

std::string baseline_method_id(BaselineKind kind);
BaselineKind baseline_from_id(const std::string& id);
const std::vector<BaselineKind>& all_baselines();

struct BaselineSpec {
  BaselineKind kind = BaselineKind::kUnfair;
  std::string base_learner = "logistic";  // "logistic" | "pfn-unfair"
  double egr_eps = 0.05;
  int egr_iters = 50;
  double egr_eta = 0.5;
  double egr_bound = 100.0;
  std::uint64_t seed = 0;
  LogisticOptions logistic;
};

/// Oracle columns a Level-k learner may see: nd_* for level one, plus u_*
/// for level two, plus eps_* for level three. A kind is applicable when its
/// column set is non-empty (the appendix table falls out of the per-case
/// declarations).
std::vector<int> level_columns(BaselineKind kind, const FairInfo& info);

struct BaselineScores {
  bool applicable = true;
  std::vector<double> factual;
  std::vector<double> cf;
  std::vector<double> direct;
  std::vector<double> indirect;
};

/// Fit on the factual data and score the factual rows plus whichever twins
/// are provided. Level-k learners score twins with their (twin-invariant)
/// oracle columns, so their effects vanish by construction.
BaselineScores fit_predict(const BaselineSpec& spec, const Dataset& factual, const Dataset* cf,
                           const Dataset* direct, const Dataset* indirect,
                           const FairInfo* fair_info,
                           const ModelParams* pfn_unfair_params = nullptr);

struct RandomizedClassifier {
  std::vector<std::pair<double, LogisticModel>> members;  // weights sum to 1
  bool converged = false;
  int iterations = 0;
  std::vector<std::uint64_t> member_seeds;

  std::vector<double> score_rows(const Tensor& X) const;
};

/// Exponentiated-gradient reduction for demographic parity: multipliers over
/// the two signed gap constraints, cost-sensitive logistic best responses,
/// uniform averaging, early stop at duality gap < eps/2.
RandomizedClassifier egr_fit(const Tensor& X, const std::vector<int>& groups,
                             const std::vector<int>& y, double eps, int max_iters,
                             double eta = 0.5, double bound = 100.0,
                             const LogisticOptions& opts = {});

/// One multiplicative multiplier update; zero violation leaves values unchanged.
void egr_multiplier_update(double& lambda_pos, double& lambda_neg, double gap, double eps,
                           double eta, double bound);

}  // namespace fairpfn
