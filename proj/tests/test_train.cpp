#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "fairpfn/train.hpp"

using namespace fairpfn;

namespace {

TrainConfig smoke_config() {
  TrainConfig cfg;
  cfg.model.layers = 2;
  cfg.model.heads = 2;
  cfg.model.width = 32;
  cfg.model.ff_width = 48;
  cfg.model.max_slots = 11;
  cfg.prior.min_samples = 48;
  cfg.prior.max_samples = 96;
  cfg.steps = 200;
  cfg.datasets_per_step = 1;
  cfg.base_lr = 1e-3;
  cfg.seed = 7;
  return cfg;
}

double mean_range(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  double s = 0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i];
  return s / static_cast<double>(hi - lo);
}

}  // namespace

TEST_CASE("smoke run: loss decreases over 200 steps") {
  const TrainConfig cfg = smoke_config();
  const TrainResult r = prior_fit(cfg);
  REQUIRE(r.loss_log.size() == 200);
  CHECK(r.skipped_datasets == 0);
  const double first10 = mean_range(r.loss_log, 0, 10);
  const double last10 = mean_range(r.loss_log, 190, 200);
  CHECK(last10 < first10);
}

TEST_CASE("training determinism across thread counts and reruns") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 12;
  cfg.datasets_per_step = 3;
  const TrainResult a = prior_fit(cfg);
  const TrainResult b = prior_fit(cfg);
  CHECK(a.params.weights_hash() == b.params.weights_hash());

  TrainConfig threaded = cfg;
  threaded.threads = 3;
  const TrainResult c = prior_fit(threaded);
  CHECK(c.params.weights_hash() == a.params.weights_hash());
}

TEST_CASE("fair and biased target modes land on different weights") {
  TrainConfig cfg = smoke_config();
  cfg.steps = 15;
  const TrainResult fair = prior_fit(cfg);
  TrainConfig biased_cfg = cfg;
  biased_cfg.model.target_mode = "biased";
  const TrainResult biased = prior_fit(biased_cfg);
  CHECK(fair.params.weights_hash() != biased.params.weights_hash());
}
