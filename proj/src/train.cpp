#include "fairpfn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fairpfn/optim.hpp"

namespace fairpfn {

using nlohmann::json;

namespace {

struct SlotResult {
  bool ok = false;
  double loss = 0.0;
  std::vector<Tensor> grads;  // parameter order
};

/// One sampled dataset: biased context + biased query features, loss on the
/// query rows' target labels.
SlotResult run_slot(const TrainConfig& cfg, const ModelParams& params, std::uint64_t slot_seed) {
  SlotResult res;
  try {
    Rng rng(slot_seed);
    const SampledPair sp = sample_pair(rng, cfg.prior);
    const Dataset& biased = sp.pair.biased;
    const Dataset& fair = sp.pair.fair;
    const i64 n = biased.n();

    // seeded row permutation, then a context/query split
    std::vector<i64> perm(static_cast<std::size_t>(n));
    for (i64 i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (i64 i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    const double frac = rng.uniform(cfg.model.ctx_frac_lo, cfg.model.ctx_frac_hi);
    i64 n_ctx = static_cast<i64>(std::llround(frac * static_cast<double>(n)));
    n_ctx = std::clamp<i64>(n_ctx, 2, n - 1);
    const i64 n_q = n - n_ctx;

    const i64 m = biased.m();
    std::vector<int> ctx_groups, ctx_labels, q_groups;
    std::vector<int> q_targets;
    Tensor ctx_X = Tensor::zeros({n_ctx, m});
    Tensor q_X = Tensor::zeros({n_q, m});
    const std::vector<int>& target_labels =
        cfg.model.target_mode == "fair" ? fair.labels : biased.labels;
    for (i64 i = 0; i < n; ++i) {
      const i64 src = perm[static_cast<std::size_t>(i)];
      if (i < n_ctx) {
        ctx_groups.push_back(biased.groups[static_cast<std::size_t>(src)]);
        ctx_labels.push_back(biased.labels[static_cast<std::size_t>(src)]);
        for (i64 j = 0; j < m; ++j) ctx_X.at(i, j) = biased.features.at(src, j);
      } else {
        q_groups.push_back(biased.groups[static_cast<std::size_t>(src)]);
        q_targets.push_back(target_labels[static_cast<std::size_t>(src)]);
        for (i64 j = 0; j < m; ++j) q_X.at(i - n_ctx, j) = biased.features.at(src, j);
      }
    }

    const EncodedBatch batch = encode(ctx_groups, ctx_X, ctx_labels, q_groups, q_X, cfg.model);
    Graph g;
    const BoundParams bound = bind(g, params, true);
    const Var logits = model_logits(g, bound, cfg.model, batch);
    Tensor targets = Tensor::zeros({n_q, 1});
    for (i64 i = 0; i < n_q; ++i) targets[i] = q_targets[static_cast<std::size_t>(i)];
    const Var loss = g.bce_with_logits(logits, targets);
    const double loss_val = g.val(loss)[0];
    if (!std::isfinite(loss_val)) return res;
    g.backward(loss);
    res.grads.reserve(bound.vars.size());
    for (Var v : bound.vars) res.grads.push_back(g.grad(v));
    res.loss = loss_val;
    res.ok = true;
  } catch (const std::exception&) {
    res.ok = false;  // non-finite forward or unstable SCM: skip this dataset
  }
  return res;
}

}  // namespace

TrainResult prior_fit(const TrainConfig& cfg) {
  cfg.model.validate();
  if (cfg.steps < 1 || cfg.datasets_per_step < 1)
    throw std::invalid_argument("prior_fit: steps and datasets_per_step must be >= 1");

  TrainResult result;
  result.params = ModelParams::init(cfg.model, cfg.seed);

  ScheduleConfig sched;
  sched.base_lr = cfg.base_lr;
  sched.floor_lr = cfg.floor_lr;
  sched.total_steps = cfg.steps;
  sched.warmup_frac = cfg.warmup_frac;
  const std::vector<Tensor*> param_ptrs = result.params.all();
  AdamState opt(param_ptrs, sched);

  std::ofstream loss_log;
  if (!cfg.loss_log_path.empty()) {
    loss_log.open(cfg.loss_log_path);
    if (!loss_log) throw std::runtime_error("prior_fit: cannot open loss log " + cfg.loss_log_path);
    loss_log << "step,loss,lr\n";
  }

  const Rng master(cfg.seed);
  const int threads = std::max(1, cfg.threads);
  for (i64 step = 0; step < cfg.steps; ++step) {
    const i64 B = cfg.datasets_per_step;
    std::vector<SlotResult> slots(static_cast<std::size_t>(B));
    auto run_range = [&](i64 begin, i64 end) {
      for (i64 k = begin; k < end; ++k)
        slots[static_cast<std::size_t>(k)] =
            run_slot(cfg, result.params,
                     master.fork(static_cast<std::uint64_t>(step * B + k)).next());
    };
    if (threads == 1 || B == 1) {
      run_range(0, B);
    } else {
      std::vector<std::thread> pool;
      const i64 chunk = (B + threads - 1) / threads;
      for (int t = 0; t < threads; ++t) {
        const i64 b = t * chunk, e = std::min<i64>(B, b + chunk);
        if (b < e) pool.emplace_back(run_range, b, e);
      }
      for (auto& th : pool) th.join();
    }

    // deterministic accumulation in slot order
    std::vector<Tensor> acc;
    double loss_sum = 0.0;
    i64 ok_count = 0;
    for (const SlotResult& s : slots) {
      result.total_datasets++;
      if (!s.ok) {
        result.skipped_datasets++;
        continue;
      }
      if (acc.empty()) {
        acc = s.grads;
      } else {
        for (std::size_t p = 0; p < acc.size(); ++p)
          for (i64 i = 0; i < acc[p].size(); ++i) acc[p][i] += s.grads[p][i];
      }
      loss_sum += s.loss;
      ok_count++;
    }
    if (ok_count > 0) {
      const double inv = 1.0 / static_cast<double>(ok_count);
      std::vector<const Tensor*> grad_ptrs;
      grad_ptrs.reserve(acc.size());
      for (auto& t : acc) {
        for (i64 i = 0; i < t.size(); ++i) t[i] *= inv;
        grad_ptrs.push_back(&t);
      }
      if (!opt.step(param_ptrs, grad_ptrs)) result.skipped_datasets += ok_count;
      const double mean_loss = loss_sum * inv;
      result.loss_log.push_back(mean_loss);
      if (loss_log)
        loss_log << step << "," << mean_loss << "," << opt.last_lr() << "\n";
      if (cfg.verbose && (step % 25 == 0 || step + 1 == cfg.steps))
        std::fprintf(stderr, "step %lld/%lld loss %.4f lr %.2e\n",
                     static_cast<long long>(step + 1), static_cast<long long>(cfg.steps),
                     mean_loss, opt.last_lr());
    } else {
      result.loss_log.push_back(std::nan(""));
    }

    if (result.total_datasets >= 100 &&
        static_cast<double>(result.skipped_datasets) >
            0.01 * static_cast<double>(result.total_datasets))
      throw std::runtime_error("prior_fit: more than 1% of datasets skipped (" +
                               std::to_string(result.skipped_datasets) + "/" +
                               std::to_string(result.total_datasets) + ")");
  }
  return result;
}

std::string train_metadata_json(const TrainConfig& cfg, const TrainResult& result) {
  json j;
  j["steps"] = cfg.steps;
  j["datasets_per_step"] = cfg.datasets_per_step;
  j["seed"] = cfg.seed;
  j["target_mode"] = cfg.model.target_mode;
  j["base_lr"] = cfg.base_lr;
  j["floor_lr"] = cfg.floor_lr;
  j["warmup_frac"] = cfg.warmup_frac;
  j["skipped_datasets"] = result.skipped_datasets;
  j["total_datasets"] = result.total_datasets;
  j["method_id"] = cfg.model.target_mode == "fair" ? "fairpfn" : "pfn-unfair";
  json prior;
  prior["min_depth"] = cfg.prior.min_depth;
  prior["max_depth"] = cfg.prior.max_depth;
  prior["min_width"] = cfg.prior.min_width;
  prior["max_width"] = cfg.prior.max_width;
  prior["min_inputs"] = cfg.prior.min_inputs;
  prior["max_inputs"] = cfg.prior.max_inputs;
  prior["min_features"] = cfg.prior.min_features;
  prior["max_features"] = cfg.prior.max_features;
  prior["min_samples"] = cfg.prior.min_samples;
  prior["max_samples"] = cfg.prior.max_samples;
  prior["keep_prob_lo"] = cfg.prior.keep_prob_lo;
  prior["keep_prob_hi"] = cfg.prior.keep_prob_hi;
  prior["noise_scale_lo"] = cfg.prior.noise_scale_lo;
  prior["noise_scale_hi"] = cfg.prior.noise_scale_hi;
  j["prior"] = std::move(prior);
  return j.dump();
}

}  // namespace fairpfn
