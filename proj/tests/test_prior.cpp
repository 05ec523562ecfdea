#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "fairpfn/metrics.hpp"
#include "fairpfn/scm.hpp"

using namespace fairpfn;

namespace {

// X = w_a * A + eps via two pass-through hidden layers; output = X + eps_out
ScmSpec linear_chain_spec(double w_a, double a0, double a1, double sigma_x) {
  ScmSpec s;
  s.input_width = 1;
  s.protected_index = 0;
  s.a0 = a0;
  s.a1 = a1;
  s.group1_prob = 0.5;
  ScmLayer h1;
  h1.weights = Tensor::from({1, 1}, {w_a});
  h1.mask = Tensor::full({1, 1}, 1.0);
  ScmLayer h2;
  h2.weights = Tensor::from({1, 1}, {1.0});
  h2.mask = Tensor::full({1, 1}, 1.0);
  ScmLayer out;
  out.weights = Tensor::from({1, 1}, {1.0});
  out.mask = Tensor::full({1, 1}, 1.0);
  s.layers = {h1, h2, out};
  s.noise_scales = {0.0, sigma_x, 0.0, 0.3};  // input, h1, h2, output
  s.feature_nodes = {2};
  s.target_node = 3;
  s.label_quantile = 0.5;
  return s;
}

}  // namespace

TEST_CASE("sample_scm: fixed seed twice gives identical spec") {
  HyperRanges hr;
  Rng r1(77), r2(77);
  const ScmSpec a = sample_scm(r1, hr);
  const ScmSpec b = sample_scm(r2, hr);
  CHECK(a.hash() == b.hash());
  CHECK(a.input_width == b.input_width);
  CHECK(a.feature_nodes == b.feature_nodes);
}

TEST_CASE("sample_scm: rejects ranges that cannot yield depth >= 2") {
  HyperRanges hr;
  hr.min_depth = 1;
  hr.max_depth = 1;
  Rng r(1);
  CHECK_THROWS(sample_scm(r, hr));
  hr.max_depth = 3;
  hr.min_width = 9;
  hr.max_width = 4;
  CHECK_THROWS(sample_scm(r, hr));
}

TEST_CASE("sample_scm: 1000 specs put every feature in hidden layer >= 2") {
  HyperRanges hr;
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const ScmSpec s = sample_scm(rng, hr);
    CHECK(s.layers.size() >= 3);  // two hidden + output
    for (i64 f : s.feature_nodes) {
      const int layer = s.layer_of(f);
      CHECK(layer >= 2);
      CHECK(layer < static_cast<int>(s.layers.size()));  // never the output layer
    }
    CHECK(std::adjacent_find(s.feature_nodes.begin(), s.feature_nodes.end()) ==
          s.feature_nodes.end());  // distinct
  }
}

TEST_CASE("sample_scm: keep probability follows a log-uniform law (KS)") {
  HyperRanges hr;
  Rng rng(5);
  const int n = 10000;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(sample_scm(rng, hr).keep_prob);
  std::sort(draws.begin(), draws.end());
  const double log_span = std::log(hr.keep_prob_hi / hr.keep_prob_lo);
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = std::log(draws[static_cast<std::size_t>(i)] / hr.keep_prob_lo) / log_span;
    ks = std::max(ks, std::fabs(cdf - static_cast<double>(i) / n));
    ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / n - cdf));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("scm_forward: all-zero weights leave pure noise") {
  HyperRanges hr;
  Rng rng(8);
  ScmSpec s = sample_scm(rng, hr);
  for (auto& l : s.layers) l.weights.fill(0.0);
  const i64 n = 10;
  std::vector<int> groups(static_cast<std::size_t>(n), 1);
  Tensor z = Tensor::zeros({n, s.total_nodes()});
  Rng nz(9);
  for (i64 i = 0; i < z.size(); ++i) z[i] = nz.normal();
  const Tensor vals = scm_forward(s, groups, z, true);
  // every activation maps 0 to 0, so nodes reduce to their noise term
  for (i64 i = 0; i < n; ++i)
    for (i64 j = s.input_width; j < s.total_nodes(); ++j) {
      const double expected = s.noise_scales[static_cast<std::size_t>(j)] * z.at(i, j);
      CHECK(vals.at(i, j) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("scm_forward: protected edges off makes groups indistinguishable") {
  HyperRanges hr;
  Rng rng(10);
  const ScmSpec s = sample_scm(rng, hr);
  const i64 n = 16;
  Tensor z = Tensor::zeros({n, s.total_nodes()});
  Rng nz(11);
  for (i64 i = 0; i < z.size(); ++i) z[i] = nz.normal();
  const std::vector<int> zeros(static_cast<std::size_t>(n), 0);
  const std::vector<int> ones(static_cast<std::size_t>(n), 1);
  const Tensor v0 = scm_forward(s, zeros, z, false);
  const Tensor v1 = scm_forward(s, ones, z, false);
  for (i64 i = 0; i < n; ++i)
    for (i64 j = s.input_width; j < s.total_nodes(); ++j)
      CHECK(v0.at(i, j) == v1.at(i, j));
}

TEST_CASE("scm_forward: hand-built two-layer spec matches manual arithmetic") {
  ScmSpec s;
  s.input_width = 2;  // protected + one exogenous
  s.protected_index = 0;
  s.a0 = -1.5;
  s.a1 = 0.5;
  ScmLayer h1;
  h1.weights = Tensor::from({2, 2}, {0.5, -1.0, 2.0, 0.25});
  h1.mask = Tensor::from({2, 2}, {1, 1, 0, 1});
  h1.act = Activation::kTanh;
  ScmLayer h2;
  h2.weights = Tensor::from({1, 2}, {1.0, -2.0});
  h2.mask = Tensor::full({1, 2}, 1.0);
  ScmLayer out;
  out.weights = Tensor::from({1, 1}, {3.0});
  out.mask = Tensor::full({1, 1}, 1.0);
  s.layers = {h1, h2, out};
  s.noise_scales = {0.0, 1.0, 0.5, 0.25, 0.1, 0.7};
  s.feature_nodes = {4};
  s.target_node = 5;

  const std::vector<int> groups = {1, 0};
  Tensor z = Tensor::from({2, 6}, {0.3, -0.2, 0.9, 0.1, -0.4, 0.8,
                                   -1.0, 0.6, 0.2, -0.3, 0.5, -0.7});
  const Tensor vals = scm_forward(s, groups, z, true);
  for (i64 i = 0; i < 2; ++i) {
    const double A = groups[static_cast<std::size_t>(i)] ? s.a1 : s.a0;
    const double u = 1.0 * z.at(i, 1);
    const double n1 = std::tanh(0.5 * A + -1.0 * u) + 0.5 * z.at(i, 2);
    const double n2 = std::tanh(0.25 * u) + 0.25 * z.at(i, 3);  // masked-out A edge
    const double x = (1.0 * n1 - 2.0 * n2) + 0.1 * z.at(i, 4);
    const double y = 3.0 * x + 0.7 * z.at(i, 5);
    CHECK(std::fabs(vals.at(i, 2) - n1) < 1e-12);
    CHECK(std::fabs(vals.at(i, 3) - n2) < 1e-12);
    CHECK(std::fabs(vals.at(i, 4) - x) < 1e-12);
    CHECK(std::fabs(vals.at(i, 5) - y) < 1e-12);
  }
}

TEST_CASE("generate_pair: zero protected out-weights collapse biased onto fair") {
  HyperRanges hr;
  Rng rng(21);
  ScmSpec s = sample_scm(rng, hr);
  for (i64 r = 0; r < s.layers[0].weights.rows(); ++r)
    s.layers[0].weights.at(r, s.protected_index) = 0.0;
  const DatasetPair pair = generate_pair(s, 64, 99);
  CHECK(pair.biased.features.vec() == pair.fair.features.vec());
  CHECK(pair.biased.labels == pair.fair.labels);
  CHECK(pair.biased.groups == pair.fair.groups);
}

TEST_CASE("generate_pair: preconditions and determinism") {
  HyperRanges hr;
  Rng rng(33);
  const ScmSpec s = sample_scm(rng, hr);
  CHECK_THROWS(generate_pair(s, 8, 1));

  const DatasetPair p1 = generate_pair(s, 128, 5);
  const DatasetPair p2 = generate_pair(s, 128, 5);
  CHECK(p1.biased.features.vec() == p2.biased.features.vec());
  CHECK(p1.fair.features.vec() == p2.fair.features.vec());
  CHECK(p1.biased.labels == p2.biased.labels);
  CHECK(p1.noise.z.vec() == p2.noise.z.vec());

  // both datasets reference the one draw
  CHECK(p1.biased.groups == p1.noise.groups);
  CHECK(p1.fair.groups == p1.noise.groups);
  CHECK(p1.biased.meta.threshold == p1.fair.meta.threshold);
}

TEST_CASE("generate_pair: biased labels are never one-sided") {
  HyperRanges hr;
  Rng rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    const SampledPair sp = sample_pair(rng, hr, 200);
    i64 pos = 0;
    for (int y : sp.pair.biased.labels) pos += y;
    CHECK(pos >= 10);  // 5% of 200
    CHECK(pos <= 190);
  }
}

TEST_CASE("fair labels are independent of the protected group") {
  HyperRanges hr;
  Rng rng(404);
  const int pairs = 100;
  const i64 n = 1000;
  double mean_abs_corr = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const SampledPair sp = sample_pair(rng, hr, n);
    std::vector<double> a, y;
    for (i64 r = 0; r < n; ++r) {
      a.push_back(sp.pair.fair.groups[static_cast<std::size_t>(r)]);
      y.push_back(sp.pair.fair.labels[static_cast<std::size_t>(r)]);
    }
    mean_abs_corr += std::fabs(pearson_corr(a, y));
  }
  mean_abs_corr /= pairs;
  CHECK(mean_abs_corr < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("counterfactual_replay: involution, missing noise, zero-edge identity") {
  HyperRanges hr;
  Rng rng(61);
  const SampledPair sp = sample_pair(rng, hr, 100);
  const Dataset twin = counterfactual_replay(sp.spec, sp.pair.biased, sp.pair.noise);
  NoiseDraw flipped_noise = sp.pair.noise;  // same z; groups travel with the dataset
  const Dataset back = counterfactual_replay(sp.spec, twin, flipped_noise);
  CHECK(back.features.vec() == sp.pair.biased.features.vec());
  CHECK(back.labels == sp.pair.biased.labels);
  CHECK(back.groups == sp.pair.biased.groups);

  CHECK_THROWS(counterfactual_replay(sp.spec, sp.pair.biased, NoiseDraw{}));

  ScmSpec cut = sp.spec;
  for (i64 r = 0; r < cut.layers[0].weights.rows(); ++r)
    cut.layers[0].weights.at(r, cut.protected_index) = 0.0;
  const DatasetPair quiet = generate_pair(cut, 100, 7);
  const Dataset quiet_twin = counterfactual_replay(cut, quiet.biased, quiet.noise);
  CHECK(quiet_twin.features.vec() == quiet.biased.features.vec());
  CHECK(quiet_twin.labels == quiet.biased.labels);
}

TEST_CASE("counterfactual_replay: linear chain shifts X by exactly w_a * (a1 - a0)") {
  const double w_a = 1.75, a0 = -0.4, a1 = 1.1;
  const ScmSpec s = linear_chain_spec(w_a, a0, a1, 1.0);
  const DatasetPair pair = generate_pair(s, 50, 3);
  const Dataset twin = counterfactual_replay(s, pair.biased, pair.noise);
  for (i64 i = 0; i < 50; ++i) {
    const double sign = pair.biased.groups[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
    const double expected = sign * w_a * (a1 - a0);
    CHECK(twin.features.at(i, 0) - pair.biased.features.at(i, 0) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("fair-mode outputs are invariant under counterfactual replay") {
  HyperRanges hr;
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const SampledPair sp = sample_pair(rng, hr);
    const Dataset twin = counterfactual_replay(sp.spec, sp.pair.fair, sp.pair.noise);
    CHECK(twin.features.vec() == sp.pair.fair.features.vec());
    CHECK(twin.labels == sp.pair.fair.labels);
  }
}

TEST_CASE("dataset and noise round-trip through CSV") {
  HyperRanges hr;
  Rng rng(81);
  const SampledPair sp = sample_pair(rng, hr, 40);
  const std::string csv = "test_prior_ds.csv";
  const std::string noise_csv = "test_prior_noise.csv";
  Dataset d = sp.pair.biased;
  d.meta.noise_file = noise_csv;
  save_dataset(d, csv);
  save_noise(sp.pair.noise, noise_csv);
  const Dataset back = load_dataset(csv);
  CHECK(back.groups == d.groups);
  CHECK(back.labels == d.labels);
  CHECK(back.features.vec() == d.features.vec());
  CHECK(back.meta.scm_hash == d.meta.scm_hash);
  CHECK(back.meta.threshold == d.meta.threshold);
  const NoiseDraw nb = load_noise(noise_csv);
  CHECK(nb.z.vec() == sp.pair.noise.z.vec());
  CHECK(nb.groups == sp.pair.noise.groups);
  std::remove(csv.c_str());
  std::remove(noise_csv.c_str());
  std::remove(sidecar_path(csv).c_str());
}

TEST_CASE("scm spec JSON round-trip preserves the hash") {
  HyperRanges hr;
  Rng rng(91);
  const ScmSpec s = sample_scm(rng, hr);
  save_scm(s, "test_scm.json");
  const ScmSpec back = load_scm("test_scm.json");
  CHECK(back.hash() == s.hash());
  std::remove("test_scm.json");
}
