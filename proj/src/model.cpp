#include "fairpfn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fairpfn/hash.hpp"

namespace fairpfn {

using nlohmann::json;

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || width < 1 || ff_width < 1)
    throw std::invalid_argument("ModelConfig: non-positive dimension");
  if (width % heads != 0) throw std::invalid_argument("ModelConfig: width not divisible by heads");
  if (max_slots < 3) throw std::invalid_argument("ModelConfig: max_slots must be >= 3");
  if (!(ctx_frac_lo > 0.0) || !(ctx_frac_hi < 1.0) || ctx_frac_lo > ctx_frac_hi)
    throw std::invalid_argument("ModelConfig: bad context fraction range");
  if (target_mode != "fair" && target_mode != "biased")
    throw std::invalid_argument("ModelConfig: target_mode must be fair or biased");
}

EncodedBatch encode(const std::vector<int>& ctx_groups, const Tensor& ctx_features,
                    const std::vector<int>& ctx_labels, const std::vector<int>& query_groups,
                    const Tensor& query_features, const ModelConfig& cfg) {
  cfg.validate();
  const i64 n_ctx = static_cast<i64>(ctx_groups.size());
  const i64 n_q = static_cast<i64>(query_groups.size());
  const i64 m = ctx_features.cols();
  if (n_ctx < 1 || n_q < 1) throw std::invalid_argument("encode: empty context or query");
  if (ctx_features.rows() != n_ctx || static_cast<i64>(ctx_labels.size()) != n_ctx)
    throw std::invalid_argument("encode: context sizes disagree");
  if (query_features.rows() != n_q)
    throw std::invalid_argument("encode: query sizes disagree");
  if (query_features.cols() != m)
    throw std::invalid_argument("encode: feature count differs between context and query");
  if (m > cfg.max_slots - 1)
    throw std::invalid_argument("encode: too many features (" + std::to_string(m) + " > " +
                                std::to_string(cfg.max_slots - 1) + " slots)");

  const i64 slots = cfg.max_slots;
  EncodedBatch b;
  b.n_ctx = n_ctx;
  b.n_query = n_q;
  b.used_slots = 1 + m;
  b.col_mean.assign(static_cast<std::size_t>(slots), 0.0);
  b.col_sd.assign(static_cast<std::size_t>(slots), 1.0);

  // context-only normalization statistics; slot 0 holds the protected column
  auto slot_value = [&](bool query, i64 row, i64 slot) -> double {
    if (slot == 0)
      return static_cast<double>(query ? query_groups[static_cast<std::size_t>(row)]
                                       : ctx_groups[static_cast<std::size_t>(row)]);
    return query ? query_features.at(row, slot - 1) : ctx_features.at(row, slot - 1);
  };
  for (i64 s = 0; s < b.used_slots; ++s) {
    double mean = 0.0;
    for (i64 i = 0; i < n_ctx; ++i) mean += slot_value(false, i, s);
    mean /= static_cast<double>(n_ctx);
    double var = 0.0;
    for (i64 i = 0; i < n_ctx; ++i) {
      const double d = slot_value(false, i, s) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n_ctx);
    b.col_mean[static_cast<std::size_t>(s)] = mean;
    b.col_sd[static_cast<std::size_t>(s)] = var > 0.0 ? std::sqrt(var) : 1.0;  // constant column
  }

  const i64 tw = cfg.token_width();
  b.input = Tensor::zeros({n_ctx + n_q, tw});
  for (i64 row = 0; row < n_ctx + n_q; ++row) {
    const bool is_query = row >= n_ctx;
    const i64 local = is_query ? row - n_ctx : row;
    for (i64 s = 0; s < slots; ++s) {
      if (s < b.used_slots) {
        double z = (slot_value(is_query, local, s) - b.col_mean[static_cast<std::size_t>(s)]) /
                   b.col_sd[static_cast<std::size_t>(s)];
        z = std::clamp(z, -100.0, 100.0);
        b.input.at(row, s) = z;
        b.input.at(row, slots + s) = 1.0;  // used-slot indicator
      }
      // padding slots stay exactly 0 with a 0 indicator
    }
    if (is_query) {
      b.input.at(row, 2 * slots + 2) = 1.0;  // missing-label channel
    } else {
      const int y = ctx_labels[static_cast<std::size_t>(local)];
      b.input.at(row, 2 * slots + (y ? 1 : 0)) = 1.0;
    }
  }
  return b;
}

namespace {

Tensor randn(Rng& rng, std::vector<i64> shape, double sd) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (i64 i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, sd);
  return t;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  p.config = cfg;
  const i64 d = cfg.width;
  const double in_sd = 1.0 / std::sqrt(static_cast<double>(cfg.token_width()));
  const double d_sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double ff_sd = 1.0 / std::sqrt(static_cast<double>(cfg.ff_width));
  const double out_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.layers));
  p.embed_w = randn(rng, {cfg.token_width(), d}, in_sd);
  p.embed_b = Tensor::zeros({1, d});
  for (int l = 0; l < cfg.layers; ++l) {
    Layer lay;
    lay.ln1_g = Tensor::full({1, d}, 1.0);
    lay.ln1_b = Tensor::zeros({1, d});
    lay.wq = randn(rng, {d, d}, d_sd);
    lay.bq = Tensor::zeros({1, d});
    lay.wk = randn(rng, {d, d}, d_sd);
    lay.bk = Tensor::zeros({1, d});
    lay.wv = randn(rng, {d, d}, d_sd);
    lay.bv = Tensor::zeros({1, d});
    lay.wo = randn(rng, {d, d}, d_sd * out_scale);
    lay.bo = Tensor::zeros({1, d});
    lay.ln2_g = Tensor::full({1, d}, 1.0);
    lay.ln2_b = Tensor::zeros({1, d});
    lay.ff1_w = randn(rng, {d, cfg.ff_width}, d_sd);
    lay.ff1_b = Tensor::zeros({1, cfg.ff_width});
    lay.ff2_w = randn(rng, {cfg.ff_width, d}, ff_sd * out_scale);
    lay.ff2_b = Tensor::zeros({1, d});
    p.layers.push_back(std::move(lay));
  }
  p.lnf_g = Tensor::full({1, d}, 1.0);
  p.lnf_b = Tensor::zeros({1, d});
  p.head_w = randn(rng, {d, 1}, 0.01);
  p.head_b = Tensor::zeros({1, 1});
  return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("embed.w", &embed_w);
  out.emplace_back("embed.b", &embed_b);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = "L" + std::to_string(l) + ".";
    Layer& y = layers[l];
    out.emplace_back(pre + "ln1.g", &y.ln1_g);
    out.emplace_back(pre + "ln1.b", &y.ln1_b);
    out.emplace_back(pre + "attn.wq", &y.wq);
    out.emplace_back(pre + "attn.bq", &y.bq);
    out.emplace_back(pre + "attn.wk", &y.wk);
    out.emplace_back(pre + "attn.bk", &y.bk);
    out.emplace_back(pre + "attn.wv", &y.wv);
    out.emplace_back(pre + "attn.bv", &y.bv);
    out.emplace_back(pre + "attn.wo", &y.wo);
    out.emplace_back(pre + "attn.bo", &y.bo);
    out.emplace_back(pre + "ln2.g", &y.ln2_g);
    out.emplace_back(pre + "ln2.b", &y.ln2_b);
    out.emplace_back(pre + "ff1.w", &y.ff1_w);
    out.emplace_back(pre + "ff1.b", &y.ff1_b);
    out.emplace_back(pre + "ff2.w", &y.ff2_w);
    out.emplace_back(pre + "ff2.b", &y.ff2_b);
  }
  out.emplace_back("lnf.g", &lnf_g);
  out.emplace_back("lnf.b", &lnf_b);
  out.emplace_back("head.w", &head_w);
  out.emplace_back("head.b", &head_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  auto mutable_named = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mutable_named.size());
  for (auto& [k, v] : mutable_named) out.emplace_back(k, v);
  return out;
}

std::vector<Tensor*> ModelParams::all() {
  std::vector<Tensor*> out;
  for (auto& [k, v] : named()) out.push_back(v);
  return out;
}

std::uint64_t ModelParams::weights_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& [name, t] : named()) {
    h = fnv1a64(name, h);
    h = fnv1a64(t->data(), static_cast<std::size_t>(t->size()) * sizeof(double), h);
  }
  return h;
}

BoundParams bind(Graph& g, const ModelParams& params, bool trainable) {
  BoundParams b;
  for (const auto& [name, t] : params.named())
    b.vars.push_back(trainable ? g.param(*t, name) : g.value(*t));
  return b;
}

Var model_logits(Graph& g, const BoundParams& bound, const ModelConfig& cfg,
                 const EncodedBatch& batch) {
  cfg.validate();
  const i64 d = cfg.width;
  const i64 dh = d / cfg.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::size_t idx = 0;
  auto next = [&]() { return bound.vars.at(idx++); };

  const Var embed_w = next(), embed_b = next();
  Var tok = g.add_rows(g.matmul(g.value(batch.input), embed_w), embed_b);

  for (int l = 0; l < cfg.layers; ++l) {
    const Var ln1_g = next(), ln1_b = next();
    const Var wq = next(), bq = next(), wk = next(), bk = next(), wv = next(), bv = next(),
              wo = next(), bo = next();
    const Var ln2_g = next(), ln2_b = next();
    const Var ff1_w = next(), ff1_b = next(), ff2_w = next(), ff2_b = next();

    Var ln = g.layer_norm_rows(tok, ln1_g, ln1_b);
    Var ctx = g.slice_rows(ln, 0, batch.n_ctx);  // keys/values come from context only
    Var q = g.add_rows(g.matmul(ln, wq), bq);
    Var k = g.add_rows(g.matmul(ctx, wk), bk);
    Var v = g.add_rows(g.matmul(ctx, wv), bv);
    std::vector<Var> heads;
    for (int h = 0; h < cfg.heads; ++h) {
      const i64 c0 = h * dh, c1 = (h + 1) * dh;
      Var qh = g.slice_cols(q, c0, c1);
      Var kh = g.slice_cols(k, c0, c1);
      Var vh = g.slice_cols(v, c0, c1);
      Var attn = g.softmax_rows(g.scale(g.matmul(qh, kh, false, true), attn_scale));
      heads.push_back(g.matmul(attn, vh));
    }
    Var mixed = g.add_rows(g.matmul(g.concat_cols(heads), wo), bo);
    tok = g.add(tok, mixed);

    Var ln2 = g.layer_norm_rows(tok, ln2_g, ln2_b);
    Var ff = g.add_rows(g.matmul(g.gelu(g.add_rows(g.matmul(ln2, ff1_w), ff1_b)), ff2_w), ff2_b);
    tok = g.add(tok, ff);
  }

  const Var lnf_g = next(), lnf_b = next(), head_w = next(), head_b = next();
  Var final_ln = g.layer_norm_rows(tok, lnf_g, lnf_b);
  Var logits = g.add_rows(g.matmul(final_ln, head_w), head_b);
  return g.slice_rows(logits, batch.n_ctx, batch.n_ctx + batch.n_query);
}

std::vector<double> predict(const ModelParams& params, const std::vector<int>& ctx_groups,
                            const Tensor& ctx_features, const std::vector<int>& ctx_labels,
                            const std::vector<int>& query_groups, const Tensor& query_features) {
  std::size_t pos = 0;
  for (int y : ctx_labels) pos += y ? 1 : 0;
  if (pos == 0 || pos == ctx_labels.size()) {
    // single-class context: Laplace-smoothed base rate
    const double rate = (static_cast<double>(pos) + 1.0) /
                        (static_cast<double>(ctx_labels.size()) + 2.0);
    return std::vector<double>(query_groups.size(), rate);
  }
  const EncodedBatch batch =
      encode(ctx_groups, ctx_features, ctx_labels, query_groups, query_features, params.config);
  Graph g;
  const BoundParams bound = bind(g, params, false);
  const Var logits = model_logits(g, bound, params.config, batch);
  const Tensor& z = g.val(logits);
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (i64 i = 0; i < z.size(); ++i) {
    const double zi = z[i];
    out[static_cast<std::size_t>(i)] =
        zi >= 0.0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
  }
  return out;
}

double bce(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size()) throw std::invalid_argument("bce: length mismatch");
  if (probabilities.empty()) throw std::invalid_argument("bce: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], 1e-12, 1.0 - 1e-12);
    total += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(probabilities.size());
}

namespace {

constexpr char kMagic[8] = {'F', 'A', 'I', 'R', 'P', 'F', 'N', '1'};

json config_to_json(const ModelConfig& c) {
  json j;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["width"] = c.width;
  j["ff_width"] = c.ff_width;
  j["max_slots"] = c.max_slots;
  j["ctx_frac_lo"] = c.ctx_frac_lo;
  j["ctx_frac_hi"] = c.ctx_frac_hi;
  j["target_mode"] = c.target_mode;
  return j;
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.width = j.at("width");
  c.ff_width = j.at("ff_width");
  c.max_slots = j.at("max_slots");
  c.ctx_frac_lo = j.at("ctx_frac_lo");
  c.ctx_frac_hi = j.at("ctx_frac_hi");
  c.target_mode = j.at("target_mode");
  return c;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json header;
  header["format_version"] = ckpt.format_version;
  header["config"] = config_to_json(ckpt.config);
  header["metadata"] = ckpt.metadata_json.empty() ? json::object()
                                                  : json::parse(ckpt.metadata_json);
  json manifest = json::array();
  i64 offset = 0;  // in doubles from blob start
  const auto named = ckpt.params.named();
  for (const auto& [name, t] : named) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t->shape();
    entry["offset"] = offset;
    manifest.push_back(std::move(entry));
    offset += t->size();
  }
  header["weights"] = std::move(manifest);
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
  char lenbuf[4] = {static_cast<char>(len & 0xff), static_cast<char>((len >> 8) & 0xff),
                    static_cast<char>((len >> 16) & 0xff), static_cast<char>((len >> 24) & 0xff)};
  out.write(lenbuf, 4);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, t] : named)
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size()) * 8);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

namespace {

json read_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  unsigned char lenbuf[4];
  in.read(reinterpret_cast<char*>(lenbuf), 4);
  if (!in) throw std::runtime_error("checkpoint: truncated header length in " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(lenbuf[0]) |
                            (static_cast<std::uint32_t>(lenbuf[1]) << 8) |
                            (static_cast<std::uint32_t>(lenbuf[2]) << 16) |
                            (static_cast<std::uint32_t>(lenbuf[3]) << 24);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  return json::parse(header_str);
}

}  // namespace

std::string inspect_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json header = read_header(in, path);
  json out;
  out["format_version"] = header.at("format_version");
  out["config"] = header.at("config");
  out["metadata"] = header.at("metadata");
  return out.dump();
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json header = read_header(in, path);
  Checkpoint ckpt;
  ckpt.format_version = header.at("format_version");
  if (ckpt.format_version != 1)
    throw std::runtime_error("checkpoint: unknown format version " +
                             std::to_string(ckpt.format_version));
  ckpt.config = config_from_json(header.at("config"));
  ckpt.metadata_json = header.at("metadata").dump();
  ckpt.params = ModelParams::init(ckpt.config, 0);

  auto named = ckpt.params.named();
  const json& manifest = header.at("weights");
  if (manifest.size() != named.size())
    throw std::runtime_error("checkpoint: weight manifest size mismatch");
  i64 total = 0;
  for (std::size_t i = 0; i < named.size(); ++i) {
    const json& entry = manifest[i];
    if (entry.at("name") != named[i].first)
      throw std::runtime_error("checkpoint: unexpected weight order at " +
                               entry.at("name").get<std::string>());
    const auto shape = entry.at("shape").get<std::vector<i64>>();
    if (shape != named[i].second->shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + named[i].first);
    if (entry.at("offset").get<i64>() != total)
      throw std::runtime_error("checkpoint: bad offset for " + named[i].first);
    total += named[i].second->size();
  }

  const std::streampos blob_start = in.tellg();
  in.seekg(0, std::ios::end);
  const i64 available = static_cast<i64>(in.tellg() - blob_start);
  const i64 expected = total * 8;
  if (available != expected)
    throw std::runtime_error("checkpoint: corrupt blob length, expected " +
                             std::to_string(expected) + " bytes, got " +
                             std::to_string(available));
  in.seekg(blob_start);
  for (auto& [name, t] : named) {
    in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size()) * 8);
    if (!in) throw std::runtime_error("checkpoint: blob read failed at " + name);
  }
  return ckpt;
}

}  // namespace fairpfn
