#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpfn/dataset.hpp"
#include "fairpfn/tensor.hpp"

namespace fairpfn {

enum class CaseId { kBiased, kDirect, kIndirect, kLevelOne, kLevelTwo, kLevelThree };

const std::vector<CaseId>& all_cases();
std::string case_name(CaseId id);
CaseId case_from_name(const std::string& name);

struct CaseStudyConfig {
  CaseId id = CaseId::kBiased;
  double w_a = 1.0;   // protected causal weight
  i64 n = 200;        // sample count, [100, 1000] when suite-sampled
  double sigma = 0.3; // noise scale, (0, 1]
  std::uint64_t seed = 0;
};

/// Side information a counterfactually fair oracle is allowed to see.
/// Column names declare the kind: nd_* non-descendant observables,
/// u_* latents, eps_* noise terms of observables.
struct FairInfo {
  std::vector<std::string> columns;
  Tensor values;  // n x columns (0 x 0 when none)
  std::vector<int> y_fair;
  bool y_fair_degenerate = false;
};

struct CaseStudyInstance {
  CaseStudyConfig config;
  Dataset factual;
  Dataset cf_twin;         // protected flipped, descendants re-propagated
  Dataset direct_twin;     // flip fed only to direct A->Y edges
  Dataset indirect_twin;   // mediators at flipped-A values, A factual
  bool direct_path_present = false;
  bool indirect_path_present = false;
  FairInfo fair_info;
};

CaseStudyInstance generate_case(const CaseStudyConfig& config);

struct PathTwinView {
  const Dataset* twin = nullptr;
  bool present = false;  // absent paths hand back the factual data
};
PathTwinView direct_path_twin(const CaseStudyInstance& inst);
PathTwinView indirect_path_twin(const CaseStudyInstance& inst);

struct SuiteConfig {
  std::string out_dir;
  i64 count_per_case = 100;
  std::uint64_t seed = 0;
  std::vector<CaseId> cases = all_cases();
  bool force = false;
  int threads = 1;
  double w_lo = 0.1, w_hi = 10.0;       // log-uniform
  i64 n_lo = 100, n_hi = 1000;          // log-uniform
  double sigma_lo = 1e-3, sigma_hi = 1.0;  // log-uniform, upper end open
};

struct SuiteEntry {
  std::string id;  // "<case>_<idx>"
  std::string case_id;
  double w_a = 0.0;
  double sigma = 0.0;
  i64 n = 0;
  std::uint64_t seed = 0;
  bool direct_path_present = false;
  bool indirect_path_present = false;
  bool y_fair_degenerate = false;
  std::string factual_file, cf_file, direct_file, indirect_file, oracle_file;
};

struct SuiteManifest {
  int schema_version = 1;
  std::uint64_t seed = 0;
  i64 count_per_case = 0;
  std::vector<SuiteEntry> instances;
  std::string hash;
};

/// Generate and write the benchmark suite. Refuses to reuse a directory that
/// already holds a manifest unless force is set.
SuiteManifest generate_suite(const SuiteConfig& config);

void save_manifest(const SuiteManifest& m, const std::string& path);
SuiteManifest load_manifest(const std::string& path);

void save_fair_info(const FairInfo& fi, const std::string& csv_path);
FairInfo load_fair_info(const std::string& csv_path);

}  // namespace fairpfn
