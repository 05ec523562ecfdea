#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpfn/model.hpp"
#include "fairpfn/scm.hpp"

namespace fairpfn {

struct TrainConfig {
  i64 steps = 600;
  i64 datasets_per_step = 4;
  std::uint64_t seed = 42;
  ModelConfig model;
  HyperRanges prior;
  double base_lr = 3e-4;
  double floor_lr = 1e-5;
  double warmup_frac = 0.05;
  int threads = 1;
  bool verbose = false;
  std::string loss_log_path;  // per-step csv: step,loss,lr (empty = off)
};

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_log;  // mean query BCE per optimizer step
  i64 skipped_datasets = 0;
  i64 total_datasets = 0;
};

/// Prior fitting: every step samples fresh SCMs, generates biased/fair pairs,
/// feeds the biased data as context and takes the loss on query predictions
/// against the fair labels (or biased labels in target_mode "biased"; the
/// fair features are never used). Deterministic for a fixed seed regardless
/// of thread count. Aborts when more than 1% of datasets are skipped for
/// non-finite losses.
TrainResult prior_fit(const TrainConfig& cfg);

/// Metadata block stored into checkpoints produced from this config.
std::string train_metadata_json(const TrainConfig& cfg, const TrainResult& result);

}  // namespace fairpfn
