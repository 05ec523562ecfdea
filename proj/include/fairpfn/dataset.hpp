#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpfn/tensor.hpp"

namespace fairpfn {

struct DatasetMeta {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string scm_hash;
  double a0 = 0.0;
  double a1 = 1.0;
  std::string twin_of;     // path of the factual file this one is a twin of
  std::string noise_file;  // path of the exogenous draw used to generate it
  double threshold = 0.0;  // label threshold in continuous-target units
  std::string mode;        // "biased" | "fair" | replay tag
  bool degenerate_labels = false;
};

/// Tabular binary-classification data with a binary protected column.
struct Dataset {
  std::vector<int> groups;     // protected column A, group ids 0/1
  Tensor features;             // n x m
  std::vector<int> labels;     // y in {0,1}
  std::vector<double> y_cont;  // raw continuous target (empty when loaded from file)
  DatasetMeta meta;

  i64 n() const { return static_cast<i64>(groups.size()); }
  i64 m() const { return features.rank() == 2 ? features.cols() : 0; }
};

/// Stored exogenous draws: one standard-normal column per SCM node plus the
/// per-sample group indicator. Kept so counterfactuals replay exactly.
struct NoiseDraw {
  Tensor z;  // n x node_count
  std::vector<int> groups;
};

struct DatasetPair {
  Dataset biased;
  Dataset fair;
  NoiseDraw noise;
};

/// CSV with header A,x1..xm,y plus a JSON sidecar at <path minus .csv>.json.
void save_dataset(const Dataset& d, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path);

void save_noise(const NoiseDraw& nd, const std::string& csv_path);
NoiseDraw load_noise(const std::string& csv_path);

std::string sidecar_path(const std::string& csv_path);

}  // namespace fairpfn
