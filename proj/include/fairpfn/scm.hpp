#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fairpfn/dataset.hpp"
#include "fairpfn/rng.hpp"
#include "fairpfn/tensor.hpp"

namespace fairpfn {

/// Thrown when a sampled SCM produces non-finite or out-of-guard node values;
/// callers resample the SCM.
struct ScmUnstable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when label binarization stays one-sided after threshold retries;
/// callers resample the SCM.
struct DegenerateLabels : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { kIdentity, kTanh, kRelu };

struct ScmLayer {
  Tensor weights;  // out x in
  Tensor mask;     // out x in, entries in {0,1}
  Activation act = Activation::kIdentity;
};

/// An MLP-shaped structural causal model. Node values are
/// act(mask .* weights @ previous) + noise_scale * z, with the exogenous
/// layer taking its values directly from the noise draw; the protected
/// input instead takes a0 or a1 by group.
struct ScmSpec {
  i64 input_width = 0;
  std::vector<ScmLayer> layers;  // hidden layers then the output layer
  std::vector<double> noise_scales;  // one per node, inputs included
  i64 protected_index = 0;  // node id within the input layer
  double a0 = 0.0;
  double a1 = 1.0;
  double group1_prob = 0.5;
  std::vector<i64> feature_nodes;  // global node ids, hidden layer >= 2 when sampled
  i64 target_node = 0;             // global node id in the output layer
  double label_quantile = 0.5;
  double quantile_lo = 0.3;  // retry range on degenerate labels
  double quantile_hi = 0.7;
  double keep_prob = 1.0;    // recorded for diagnostics
  double value_guard = 1e6;  // |node| above this flags the SCM unstable

  i64 total_nodes() const;
  i64 layer_offset(std::size_t layer) const;  // global id of a layer's first node (0 = inputs)
  int layer_of(i64 node) const;
  std::string hash() const;
};

struct HyperRanges {
  i64 min_depth = 2, max_depth = 5;      // hidden layer count
  i64 min_width = 4, max_width = 32;
  i64 min_inputs = 2, max_inputs = 6;
  i64 min_outputs = 1, max_outputs = 4;
  i64 min_features = 2, max_features = 10;
  double keep_prob_lo = 0.1, keep_prob_hi = 1.0;      // log-uniform
  double noise_scale_lo = 0.01, noise_scale_hi = 1.0; // log-uniform
  double group1_lo = 0.1, group1_hi = 0.9;
  double quantile_lo = 0.3, quantile_hi = 0.7;
  i64 min_samples = 100, max_samples = 1000;          // log-uniform
  double max_abs_protected = 4.0;
  double value_guard = 1e6;
};

ScmSpec sample_scm(Rng& rng, const HyperRanges& hr);

/// All node values (n x total_nodes). With protected edges inactive every
/// weight out of the protected input is treated as zero.
Tensor scm_forward(const ScmSpec& spec, const std::vector<int>& groups, const Tensor& z,
                   bool protected_edges_active);

/// One biased/fair dataset pair from a shared exogenous draw. Labels are
/// binarized at the biased run's quantile threshold; the same threshold is
/// applied to the fair run. Throws DegenerateLabels / ScmUnstable.
DatasetPair generate_pair(const ScmSpec& spec, i64 n, std::uint64_t seed);

/// Flip every sample's group and re-propagate descendants with the stored
/// draw. Fair-mode datasets replay with protected edges off and so come back
/// unchanged. Labels use the dataset's stored threshold.
Dataset counterfactual_replay(const ScmSpec& spec, const Dataset& dataset, const NoiseDraw& noise);

/// sample_scm + generate_pair with SCM resampling on degenerate or unstable
/// draws. n < 0 samples the row count from the hyper ranges.
struct SampledPair {
  ScmSpec spec;
  DatasetPair pair;
};
SampledPair sample_pair(Rng& rng, const HyperRanges& hr, i64 n = -1);

void save_scm(const ScmSpec& spec, const std::string& json_path);
ScmSpec load_scm(const std::string& json_path);

}  // namespace fairpfn
