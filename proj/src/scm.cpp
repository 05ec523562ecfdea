#include "fairpfn/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fairpfn/hash.hpp"

namespace fairpfn {

using nlohmann::json;

i64 ScmSpec::total_nodes() const {
  i64 n = input_width;
  for (const auto& l : layers) n += l.weights.rows();
  return n;
}

i64 ScmSpec::layer_offset(std::size_t layer) const {
  i64 off = input_width;
  for (std::size_t l = 0; l + 1 < layer; ++l) off += layers[l].weights.rows();
  return layer == 0 ? 0 : off;
}

int ScmSpec::layer_of(i64 node) const {
  if (node < input_width) return 0;
  i64 off = input_width;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    off += layers[l].weights.rows();
    if (node < off) return static_cast<int>(l) + 1;
  }
  throw std::out_of_range("ScmSpec::layer_of: node id out of range");
}

namespace {

void hash_doubles(std::uint64_t& h, const std::vector<double>& v) {
  h = fnv1a64(v.data(), v.size() * sizeof(double), h);
}

void hash_i64(std::uint64_t& h, i64 v) { h = fnv1a64(&v, sizeof(v), h); }

double apply_act(Activation a, double x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

}  // namespace

std::string ScmSpec::hash() const {
  std::uint64_t h = kFnvOffset;
  hash_i64(h, input_width);
  for (const auto& l : layers) {
    hash_i64(h, l.weights.rows());
    hash_i64(h, l.weights.cols());
    hash_doubles(h, l.weights.vec());
    hash_doubles(h, l.mask.vec());
    hash_i64(h, static_cast<i64>(l.act));
  }
  hash_doubles(h, noise_scales);
  hash_i64(h, protected_index);
  hash_doubles(h, {a0, a1, group1_prob, label_quantile, keep_prob, value_guard});
  for (i64 f : feature_nodes) hash_i64(h, f);
  hash_i64(h, target_node);
  return hex64(h);
}

ScmSpec sample_scm(Rng& rng, const HyperRanges& hr) {
  if (hr.min_depth > hr.max_depth || hr.min_width > hr.max_width ||
      hr.min_inputs > hr.max_inputs || hr.min_features > hr.max_features ||
      hr.min_samples > hr.max_samples)
    throw std::invalid_argument("sample_scm: invalid hyper ranges (min > max)");
  if (hr.max_depth < 2)
    throw std::invalid_argument("sample_scm: ranges cannot yield depth >= 2, no feature layer");

  ScmSpec s;
  s.input_width = rng.uniform_int(hr.min_inputs, hr.max_inputs);
  s.protected_index = 0;
  const i64 depth = rng.uniform_int(std::max<i64>(2, hr.min_depth), hr.max_depth);
  const i64 out_width = rng.uniform_int(hr.min_outputs, hr.max_outputs);
  s.keep_prob = rng.log_uniform(hr.keep_prob_lo, hr.keep_prob_hi);
  s.group1_prob = rng.uniform(hr.group1_lo, hr.group1_hi);
  s.quantile_lo = hr.quantile_lo;
  s.quantile_hi = hr.quantile_hi;
  s.label_quantile = rng.uniform(hr.quantile_lo, hr.quantile_hi);
  s.value_guard = hr.value_guard;

  // protected values drawn like the other exogenous inputs, clamped
  auto draw_a = [&]() {
    const double v = rng.normal();
    return std::clamp(v, -hr.max_abs_protected, hr.max_abs_protected);
  };
  s.a0 = draw_a();
  s.a1 = draw_a();

  std::vector<i64> widths;
  for (i64 l = 0; l < depth; ++l) widths.push_back(rng.uniform_int(hr.min_width, hr.max_width));
  widths.push_back(out_width);

  i64 in_w = s.input_width;
  for (std::size_t l = 0; l < widths.size(); ++l) {
    ScmLayer layer;
    const i64 out_w = widths[l];
    layer.weights = Tensor::zeros({out_w, in_w});
    layer.mask = Tensor::zeros({out_w, in_w});
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_w));
    for (i64 i = 0; i < layer.weights.size(); ++i) {
      layer.weights[i] = rng.normal(0.0, scale);
      layer.mask[i] = rng.bernoulli(s.keep_prob) ? 1.0 : 0.0;
    }
    const bool is_output = l + 1 == widths.size();
    if (is_output) {
      layer.act = Activation::kIdentity;
    } else {
      const i64 pick = rng.uniform_int(0, 2);
      layer.act = pick == 0 ? Activation::kIdentity
                            : (pick == 1 ? Activation::kTanh : Activation::kRelu);
    }
    s.layers.push_back(std::move(layer));
    in_w = out_w;
  }

  for (i64 node = 0; node < s.total_nodes(); ++node)
    s.noise_scales.push_back(rng.log_uniform(hr.noise_scale_lo, hr.noise_scale_hi));

  // features live in hidden layer 2 onward so they carry composed causes
  std::vector<i64> candidates;
  const i64 layer2_start = s.layer_offset(2);
  const i64 output_start = s.layer_offset(widths.size());
  for (i64 node = layer2_start; node < output_start; ++node) candidates.push_back(node);
  i64 m = rng.uniform_int(hr.min_features, hr.max_features);
  m = std::min<i64>(m, static_cast<i64>(candidates.size()));
  for (i64 pick = 0; pick < m; ++pick) {
    const i64 j = rng.uniform_int(pick, static_cast<i64>(candidates.size()) - 1);
    std::swap(candidates[static_cast<std::size_t>(pick)], candidates[static_cast<std::size_t>(j)]);
  }
  s.feature_nodes.assign(candidates.begin(), candidates.begin() + m);
  std::sort(s.feature_nodes.begin(), s.feature_nodes.end());

  s.target_node = output_start + rng.uniform_int(0, out_width - 1);
  return s;
}

Tensor scm_forward(const ScmSpec& spec, const std::vector<int>& groups, const Tensor& z,
                   bool protected_edges_active) {
  const i64 n = static_cast<i64>(groups.size());
  if (n < 1) throw std::invalid_argument("scm_forward: need at least one noise row");
  if (z.rows() != n || z.cols() != spec.total_nodes())
    throw std::invalid_argument("scm_forward: noise shape mismatch");

  Tensor values = Tensor::zeros({n, spec.total_nodes()});
  // exogenous layer
  for (i64 i = 0; i < n; ++i) {
    for (i64 j = 0; j < spec.input_width; ++j) {
      if (j == spec.protected_index)
        values.at(i, j) = groups[static_cast<std::size_t>(i)] ? spec.a1 : spec.a0;
      else
        values.at(i, j) = spec.noise_scales[static_cast<std::size_t>(j)] * z.at(i, j);
    }
  }

  Tensor prev = Tensor::zeros({n, spec.input_width});
  for (i64 i = 0; i < n; ++i)
    for (i64 j = 0; j < spec.input_width; ++j) prev.at(i, j) = values.at(i, j);

  i64 node_off = spec.input_width;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const ScmLayer& layer = spec.layers[l];
    const i64 out_w = layer.weights.rows();
    Tensor eff = layer.weights;
    for (i64 i = 0; i < eff.size(); ++i) eff[i] *= layer.mask[i];
    if (l == 0 && !protected_edges_active)
      for (i64 r = 0; r < out_w; ++r) eff.at(r, spec.protected_index) = 0.0;

    Tensor pre = Tensor::zeros({n, out_w});
    matmul_into(prev, false, eff, true, pre);
    for (i64 i = 0; i < n; ++i)
      for (i64 j = 0; j < out_w; ++j) {
        const double v = apply_act(layer.act, pre.at(i, j)) +
                         spec.noise_scales[static_cast<std::size_t>(node_off + j)] *
                             z.at(i, node_off + j);
        values.at(i, node_off + j) = v;
        pre.at(i, j) = v;
      }
    prev = std::move(pre);
    node_off += out_w;
  }
  return values;
}

namespace {

double quantile_threshold(std::vector<double> sorted_copy, double q) {
  std::sort(sorted_copy.begin(), sorted_copy.end());
  const i64 n = static_cast<i64>(sorted_copy.size());
  i64 idx = static_cast<i64>(std::floor(q * static_cast<double>(n)));
  idx = std::clamp<i64>(idx, 0, n - 1);
  return sorted_copy[static_cast<std::size_t>(idx)];
}

void check_stable(const Tensor& values, double guard) {
  for (i64 i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || std::fabs(v) > guard)
      throw ScmUnstable("scm node value non-finite or beyond guard");
  }
}

Dataset extract(const ScmSpec& spec, const Tensor& values, const std::vector<int>& groups,
                double threshold, std::uint64_t seed, const std::string& mode) {
  const i64 n = values.rows();
  Dataset d;
  d.groups = groups;
  d.features = Tensor::zeros({n, static_cast<i64>(spec.feature_nodes.size())});
  for (i64 i = 0; i < n; ++i)
    for (std::size_t j = 0; j < spec.feature_nodes.size(); ++j)
      d.features.at(i, static_cast<i64>(j)) = values.at(i, spec.feature_nodes[j]);
  d.y_cont.resize(static_cast<std::size_t>(n));
  d.labels.resize(static_cast<std::size_t>(n));
  for (i64 i = 0; i < n; ++i) {
    const double y = values.at(i, spec.target_node);
    d.y_cont[static_cast<std::size_t>(i)] = y;
    d.labels[static_cast<std::size_t>(i)] = y > threshold ? 1 : 0;
  }
  d.meta.seed = seed;
  d.meta.scm_hash = spec.hash();
  d.meta.a0 = spec.a0;
  d.meta.a1 = spec.a1;
  d.meta.threshold = threshold;
  d.meta.mode = mode;
  return d;
}

}  // namespace

DatasetPair generate_pair(const ScmSpec& spec, i64 n, std::uint64_t seed) {
  if (n < 16) throw std::invalid_argument("generate_pair: need n >= 16");
  Rng rng(seed);
  NoiseDraw nd;
  nd.groups.resize(static_cast<std::size_t>(n));
  for (auto& g : nd.groups) g = rng.bernoulli(spec.group1_prob) ? 1 : 0;
  nd.z = Tensor::zeros({n, spec.total_nodes()});
  for (i64 i = 0; i < nd.z.size(); ++i) nd.z[i] = rng.normal();

  const Tensor biased_values = scm_forward(spec, nd.groups, nd.z, true);
  check_stable(biased_values, spec.value_guard);
  const Tensor fair_values = scm_forward(spec, nd.groups, nd.z, false);
  check_stable(fair_values, spec.value_guard);

  std::vector<double> y_bias(static_cast<std::size_t>(n));
  for (i64 i = 0; i < n; ++i) y_bias[static_cast<std::size_t>(i)] = biased_values.at(i, spec.target_node);

  // threshold at q of the biased target; retry q when a class drops under 5%
  double q = spec.label_quantile;
  double threshold = 0.0;
  bool ok = false;
  for (int attempt = 0; attempt < 6 && !ok; ++attempt) {
    if (attempt > 0) q = rng.uniform(spec.quantile_lo, spec.quantile_hi);
    threshold = quantile_threshold(y_bias, q);
    i64 pos = 0;
    for (double y : y_bias) pos += y > threshold ? 1 : 0;
    const i64 minority = std::min<i64>(pos, n - pos);
    ok = minority >= std::max<i64>(1, static_cast<i64>(0.05 * static_cast<double>(n)));
  }
  if (!ok) throw DegenerateLabels("generate_pair: labels stay one-sided after threshold retries");

  DatasetPair pair;
  pair.biased = extract(spec, biased_values, nd.groups, threshold, seed, "biased");
  pair.fair = extract(spec, fair_values, nd.groups, threshold, seed, "fair");
  pair.noise = std::move(nd);
  return pair;
}

Dataset counterfactual_replay(const ScmSpec& spec, const Dataset& dataset, const NoiseDraw& noise) {
  if (noise.z.size() == 0)
    throw std::invalid_argument("counterfactual_replay: missing noise record, cannot replay");
  if (noise.z.rows() != dataset.n())
    throw std::invalid_argument("counterfactual_replay: noise rows do not match dataset");
  std::vector<int> flipped(dataset.groups.size());
  for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = 1 - dataset.groups[i];
  const bool edges_active = dataset.meta.mode != "fair";
  const Tensor values = scm_forward(spec, flipped, noise.z, edges_active);
  Dataset twin = extract(spec, values, flipped, dataset.meta.threshold, dataset.meta.seed,
                         dataset.meta.mode);
  twin.meta.twin_of = dataset.meta.twin_of.empty() ? "(in-memory)" : dataset.meta.twin_of;
  return twin;
}

SampledPair sample_pair(Rng& rng, const HyperRanges& hr, i64 n) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    ScmSpec spec = sample_scm(rng, hr);
    const i64 rows = n > 0 ? n
                           : static_cast<i64>(std::llround(rng.log_uniform(
                                 static_cast<double>(hr.min_samples),
                                 static_cast<double>(hr.max_samples))));
    const std::uint64_t pair_seed = rng.next();
    try {
      DatasetPair pair = generate_pair(spec, rows, pair_seed);
      return SampledPair{std::move(spec), std::move(pair)};
    } catch (const ScmUnstable&) {
    } catch (const DegenerateLabels&) {
    }
  }
  throw std::runtime_error("sample_pair: no stable SCM after 200 attempts");
}

void save_scm(const ScmSpec& spec, const std::string& json_path) {
  json j;
  j["input_width"] = spec.input_width;
  j["protected_index"] = spec.protected_index;
  j["a0"] = spec.a0;
  j["a1"] = spec.a1;
  j["group1_prob"] = spec.group1_prob;
  j["feature_nodes"] = spec.feature_nodes;
  j["target_node"] = spec.target_node;
  j["label_quantile"] = spec.label_quantile;
  j["quantile_lo"] = spec.quantile_lo;
  j["quantile_hi"] = spec.quantile_hi;
  j["keep_prob"] = spec.keep_prob;
  j["value_guard"] = spec.value_guard;
  j["noise_scales"] = spec.noise_scales;
  j["layers"] = json::array();
  for (const auto& l : spec.layers) {
    json jl;
    jl["rows"] = l.weights.rows();
    jl["cols"] = l.weights.cols();
    jl["weights"] = l.weights.vec();
    jl["mask"] = l.mask.vec();
    jl["act"] = static_cast<int>(l.act);
    j["layers"].push_back(std::move(jl));
  }
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("save_scm: cannot write " + json_path);
  out << j.dump() << "\n";
}

ScmSpec load_scm(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("load_scm: cannot open " + json_path);
  json j = json::parse(in);
  ScmSpec s;
  s.input_width = j.at("input_width");
  s.protected_index = j.at("protected_index");
  s.a0 = j.at("a0");
  s.a1 = j.at("a1");
  s.group1_prob = j.at("group1_prob");
  s.feature_nodes = j.at("feature_nodes").get<std::vector<i64>>();
  s.target_node = j.at("target_node");
  s.label_quantile = j.at("label_quantile");
  s.quantile_lo = j.at("quantile_lo");
  s.quantile_hi = j.at("quantile_hi");
  s.keep_prob = j.at("keep_prob");
  s.value_guard = j.at("value_guard");
  s.noise_scales = j.at("noise_scales").get<std::vector<double>>();
  for (const auto& jl : j.at("layers")) {
    ScmLayer l;
    const i64 r = jl.at("rows"), c = jl.at("cols");
    l.weights = Tensor::from({r, c}, jl.at("weights").get<std::vector<double>>());
    l.mask = Tensor::from({r, c}, jl.at("mask").get<std::vector<double>>());
    l.act = static_cast<Activation>(jl.at("act").get<int>());
    s.layers.push_back(std::move(l));
  }
  return s;
}

}  // namespace fairpfn
