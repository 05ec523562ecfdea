#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairpfn/graph.hpp"
#include "fairpfn/rng.hpp"
#include "fairpfn/tensor.hpp"

namespace fairpfn {

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  i64 width = 128;
  i64 ff_width = 256;
  i64 max_slots = 11;  // protected slot 0 plus up to max_slots-1 features
  double ctx_frac_lo = 0.3;
  double ctx_frac_hi = 0.8;
  std::string target_mode = "fair";  // "fair" | "biased"

  void validate() const;
  i64 token_width() const { return 2 * max_slots + 3; }  // values, used flags, label one-hot
};

/// Row tokens ready for the transformer. The attention pattern is fixed:
/// every token (context and query) attends to the context block only.
struct EncodedBatch {
  Tensor input;  // (n_ctx + n_query) x token_width
  i64 n_ctx = 0;
  i64 n_query = 0;
  std::vector<double> col_mean;  // context statistics per slot
  std::vector<double> col_sd;
  i64 used_slots = 0;

  bool attends(i64 /*from*/, i64 key_pos) const { return key_pos < n_ctx; }
};

/// Tokenize context and query rows: slot 0 carries the protected attribute,
/// features are z-normalized per column from context statistics and padded
/// with zeroed slots plus a used-slot indicator; labels enter one-hot with a
/// dedicated missing-label channel for queries.
EncodedBatch encode(const std::vector<int>& ctx_groups, const Tensor& ctx_features,
                    const std::vector<int>& ctx_labels, const std::vector<int>& query_groups,
                    const Tensor& query_features, const ModelConfig& cfg);

struct ModelParams {
  struct Layer {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  };
  ModelConfig config;
  Tensor embed_w, embed_b;
  std::vector<Layer> layers;
  Tensor lnf_g, lnf_b;
  Tensor head_w, head_b;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::vector<Tensor*> all();
  std::uint64_t weights_hash() const;
};

/// Parameters mirrored into a graph; `trainable` decides param vs value leaves.
struct BoundParams {
  std::vector<Var> vars;  // order matches ModelParams::named()
};
BoundParams bind(Graph& g, const ModelParams& params, bool trainable);

/// Query-row logits (n_query x 1).
Var model_logits(Graph& g, const BoundParams& bound, const ModelConfig& cfg,
                 const EncodedBatch& batch);

/// Probabilities for query rows given an observed context. Falls back to the
/// Laplace-smoothed context base rate when the context has a single class.
std::vector<double> predict(const ModelParams& params, const std::vector<int>& ctx_groups,
                            const Tensor& ctx_features, const std::vector<int>& ctx_labels,
                            const std::vector<int>& query_groups, const Tensor& query_features);

/// Mean binary cross-entropy on probabilities clamped at 1e-12.
double bce(const std::vector<double>& probabilities, const std::vector<int>& labels);

struct Checkpoint {
  int format_version = 1;
  ModelConfig config;
  std::string metadata_json;  // training provenance, free-form
  ModelParams params;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
/// Header-only inspection: magic, version, config and metadata, no weight read.
std::string inspect_checkpoint_header(const std::string& path);

}  // namespace fairpfn
