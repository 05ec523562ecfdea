#include "fairpfn/casebench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fairpfn/csv.hpp"
#include "fairpfn/hash.hpp"
#include "fairpfn/rng.hpp"
#include "fairpfn/scm.hpp"

namespace fairpfn {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<CaseId>& all_cases() {
  static const std::vector<CaseId> cases = {CaseId::kBiased,   CaseId::kDirect,
                                            CaseId::kIndirect, CaseId::kLevelOne,
                                            CaseId::kLevelTwo, CaseId::kLevelThree};
  return cases;
}

std::string case_name(CaseId id) {
  switch (id) {
    case CaseId::kBiased: return "biased";
    case CaseId::kDirect: return "direct";
    case CaseId::kIndirect: return "indirect";
    case CaseId::kLevelOne: return "level-one";
    case CaseId::kLevelTwo: return "level-two";
    case CaseId::kLevelThree: return "level-three";
  }
  throw std::logic_error("case_name: bad id");
}

CaseId case_from_name(const std::string& name) {
  for (CaseId c : all_cases())
    if (case_name(c) == name) return c;
  throw std::invalid_argument("unknown case study: " + name);
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Draws {
  std::vector<int> a;          // group ids
  std::vector<double> eps_x;   // noise of the (first) observable
  std::vector<double> eps_2;   // second observable's noise (indirect case)
  std::vector<double> eps_y;
  std::vector<double> u;       // latent (level-two case)
};

Draws make_draws(const CaseStudyConfig& c, std::uint64_t eps_y_stream) {
  Rng rng(c.seed);
  Draws d;
  const std::size_t n = static_cast<std::size_t>(c.n);
  d.a.resize(n);
  d.eps_x.resize(n);
  d.eps_2.resize(n);
  d.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.a[i] = rng.bernoulli(0.5) ? 1 : 0;
    d.eps_x[i] = rng.normal(0.0, c.sigma);
    d.eps_2[i] = rng.normal(0.0, c.sigma);
    d.u[i] = rng.normal();
  }
  Rng ry = rng.fork(eps_y_stream);
  d.eps_y.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.eps_y[i] = ry.normal(0.0, c.sigma);
  return d;
}

struct StructuralOutputs {
  Tensor features;               // n x m
  std::vector<double> score;     // pre-squash target input
};

/// Structural equations per case; w may be zeroed for the fair world and
/// `a_direct` / `a_mediator` are the group values fed to the direct edge and
/// to the mediators respectively (they differ for path twins).
StructuralOutputs structural(const CaseStudyConfig& c, const Draws& d, double w,
                             const std::vector<int>& a_direct,
                             const std::vector<int>& a_mediator) {
  const i64 n = c.n;
  StructuralOutputs out;
  out.score.resize(static_cast<std::size_t>(n));
  const i64 m = c.id == CaseId::kIndirect ? 2 : 1;
  out.features = Tensor::zeros({n, m});
  for (i64 i = 0; i < n; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double am = static_cast<double>(a_mediator[k]);
    const double ad = static_cast<double>(a_direct[k]);
    double score = 0.0;
    switch (c.id) {
      case CaseId::kBiased: {
        const double x = w * am * am + d.eps_x[k];
        out.features.at(i, 0) = x;
        score = x + d.eps_y[k];
        break;
      }
      case CaseId::kDirect: {
        const double x = d.eps_x[k];
        out.features.at(i, 0) = x;
        score = w * ad + x + d.eps_y[k];
        break;
      }
      case CaseId::kIndirect: {
        const double x1 = d.eps_x[k];
        const double x2 = w * am + d.eps_2[k];
        out.features.at(i, 0) = x1;
        out.features.at(i, 1) = x2;
        score = x1 + x2 + d.eps_y[k];
        break;
      }
      case CaseId::kLevelOne: {
        const double x = w * am + d.eps_x[k];
        out.features.at(i, 0) = x;
        score = x + d.eps_y[k];
        break;
      }
      case CaseId::kLevelTwo: {
        const double x = w * am + d.u[k] + d.eps_x[k];
        out.features.at(i, 0) = x;
        score = d.u[k] + d.eps_y[k];
        break;
      }
      case CaseId::kLevelThree: {
        const double x = w * am + d.eps_x[k];
        out.features.at(i, 0) = x;
        score = d.eps_x[k] + d.eps_y[k];
        break;
      }
    }
    out.score[k] = score;
  }
  return out;
}

Dataset to_dataset(const CaseStudyConfig& c, const StructuralOutputs& so,
                   const std::vector<int>& a_column, double threshold, const std::string& mode) {
  Dataset d;
  d.groups = a_column;
  d.features = so.features;
  d.y_cont.resize(so.score.size());
  d.labels.resize(so.score.size());
  for (std::size_t i = 0; i < so.score.size(); ++i) {
    d.y_cont[i] = logistic(so.score[i]);
    d.labels[i] = d.y_cont[i] > threshold ? 1 : 0;
  }
  d.meta.seed = c.seed;
  d.meta.scm_hash = case_name(c.id);
  d.meta.a0 = 0.0;
  d.meta.a1 = 1.0;
  d.meta.threshold = threshold;
  d.meta.mode = mode;
  return d;
}

bool labels_degenerate(const std::vector<int>& labels) {
  i64 pos = 0;
  for (int y : labels) pos += y;
  return pos == 0 || pos == static_cast<i64>(labels.size());
}

}  // namespace

CaseStudyInstance generate_case(const CaseStudyConfig& config) {
  if (config.n < 2) throw std::invalid_argument("generate_case: need n >= 2");
  if (!(config.sigma > 0.0)) throw std::invalid_argument("generate_case: sigma must be positive");

  CaseStudyInstance inst;
  inst.config = config;
  inst.direct_path_present = config.id == CaseId::kDirect;
  inst.indirect_path_present = config.id != CaseId::kDirect;

  for (int attempt = 0; attempt < 2; ++attempt) {
    const Draws d = make_draws(config, attempt == 0 ? 1 : 2);  // reseed eps_y once on degeneracy
    std::vector<int> a_flip(d.a.size());
    for (std::size_t i = 0; i < d.a.size(); ++i) a_flip[i] = 1 - d.a[i];

    const StructuralOutputs factual = structural(config, d, config.w_a, d.a, d.a);
    std::vector<double> sorted(factual.score.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = logistic(factual.score[i]);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t nn = sorted.size();
    const double threshold =
        nn % 2 ? sorted[nn / 2] : 0.5 * (sorted[nn / 2 - 1] + sorted[nn / 2]);

    inst.factual = to_dataset(config, factual, d.a, threshold, "factual");
    if (labels_degenerate(inst.factual.labels)) {
      if (attempt == 0) continue;
      throw DegenerateLabels("generate_case: labels degenerate after eps_y reseed");
    }

    const StructuralOutputs cf = structural(config, d, config.w_a, a_flip, a_flip);
    inst.cf_twin = to_dataset(config, cf, a_flip, threshold, "counterfactual");

    if (inst.direct_path_present) {
      const StructuralOutputs dt = structural(config, d, config.w_a, a_flip, d.a);
      inst.direct_twin = to_dataset(config, dt, a_flip, threshold, "direct-twin");
    } else {
      inst.direct_twin = inst.factual;
      inst.direct_twin.meta.mode = "direct-twin";
    }
    if (inst.indirect_path_present) {
      const StructuralOutputs it = structural(config, d, config.w_a, d.a, a_flip);
      inst.indirect_twin = to_dataset(config, it, d.a, threshold, "indirect-twin");
    } else {
      inst.indirect_twin = inst.factual;
      inst.indirect_twin.meta.mode = "indirect-twin";
    }

    // fair world: w_a forced to zero, identical draws, same threshold
    const StructuralOutputs fair = structural(config, d, 0.0, d.a, d.a);
    inst.fair_info.y_fair.resize(static_cast<std::size_t>(config.n));
    for (std::size_t i = 0; i < fair.score.size(); ++i)
      inst.fair_info.y_fair[i] = logistic(fair.score[i]) > threshold ? 1 : 0;
    inst.fair_info.y_fair_degenerate = labels_degenerate(inst.fair_info.y_fair);

    switch (config.id) {
      case CaseId::kBiased:
      case CaseId::kLevelOne:
        break;  // no fair columns exist for these graphs
      case CaseId::kDirect: {
        inst.fair_info.columns = {"nd_x1"};
        inst.fair_info.values = Tensor::zeros({config.n, 1});
        for (i64 i = 0; i < config.n; ++i)
          inst.fair_info.values.at(i, 0) = inst.factual.features.at(i, 0);
        break;
      }
      case CaseId::kIndirect: {
        inst.fair_info.columns = {"nd_x1"};
        inst.fair_info.values = Tensor::zeros({config.n, 1});
        for (i64 i = 0; i < config.n; ++i)
          inst.fair_info.values.at(i, 0) = inst.factual.features.at(i, 0);
        break;
      }
      case CaseId::kLevelTwo: {
        inst.fair_info.columns = {"u_1"};
        inst.fair_info.values = Tensor::zeros({config.n, 1});
        for (i64 i = 0; i < config.n; ++i)
          inst.fair_info.values.at(i, 0) = d.u[static_cast<std::size_t>(i)];
        break;
      }
      case CaseId::kLevelThree: {
        inst.fair_info.columns = {"eps_x1"};
        inst.fair_info.values = Tensor::zeros({config.n, 1});
        for (i64 i = 0; i < config.n; ++i)
          inst.fair_info.values.at(i, 0) = d.eps_x[static_cast<std::size_t>(i)];
        break;
      }
    }
    return inst;
  }
  throw std::logic_error("generate_case: unreachable");
}

PathTwinView direct_path_twin(const CaseStudyInstance& inst) {
  return {&inst.direct_twin, inst.direct_path_present};
}

PathTwinView indirect_path_twin(const CaseStudyInstance& inst) {
  return {&inst.indirect_twin, inst.indirect_path_present};
}

void save_fair_info(const FairInfo& fi, const std::string& csv_path) {
  CsvTable t;
  t.header = fi.columns;
  t.header.push_back("y_fair");
  for (std::size_t i = 0; i < fi.y_fair.size(); ++i) {
    std::vector<std::string> row;
    for (i64 j = 0; j < static_cast<i64>(fi.columns.size()); ++j)
      row.push_back(format_double(fi.values.at(static_cast<i64>(i), j)));
    row.push_back(std::to_string(fi.y_fair[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(csv_path, t);
}

FairInfo load_fair_info(const std::string& csv_path) {
  const CsvTable t = read_csv(csv_path);
  if (t.header.empty() || t.header.back() != "y_fair")
    throw std::runtime_error("load_fair_info: expected trailing y_fair column in " + csv_path);
  FairInfo fi;
  fi.columns.assign(t.header.begin(), t.header.end() - 1);
  const i64 m = static_cast<i64>(fi.columns.size());
  fi.values = Tensor::zeros({static_cast<i64>(t.n_rows()), m});
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (i64 j = 0; j < m; ++j)
      fi.values.at(static_cast<i64>(r), j) = parse_double(t.rows[r][static_cast<std::size_t>(j)]);
    fi.y_fair.push_back(t.rows[r].back() == "1" ? 1 : 0);
  }
  fi.y_fair_degenerate = labels_degenerate(fi.y_fair);
  return fi;
}

namespace {

json manifest_to_json(const SuiteManifest& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["seed"] = m.seed;
  j["count_per_case"] = m.count_per_case;
  j["instances"] = json::array();
  for (const auto& e : m.instances) {
    json je;
    je["id"] = e.id;
    je["case"] = e.case_id;
    je["w_a"] = e.w_a;
    je["sigma"] = e.sigma;
    je["n"] = e.n;
    je["seed"] = e.seed;
    je["direct_path_present"] = e.direct_path_present;
    je["indirect_path_present"] = e.indirect_path_present;
    je["y_fair_degenerate"] = e.y_fair_degenerate;
    je["factual_file"] = e.factual_file;
    je["cf_file"] = e.cf_file;
    je["direct_file"] = e.direct_file;
    je["indirect_file"] = e.indirect_file;
    je["oracle_file"] = e.oracle_file;
    j["instances"].push_back(std::move(je));
  }
  return j;
}

}  // namespace

void save_manifest(const SuiteManifest& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_manifest: cannot write " + path);
  out << manifest_to_json(m).dump(2) << "\n";
}

SuiteManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open " + path);
  json j = json::parse(in);
  SuiteManifest m;
  m.schema_version = j.value("schema_version", 1);
  m.seed = j.value("seed", std::uint64_t{0});
  m.count_per_case = j.value("count_per_case", i64{0});
  for (const auto& je : j.at("instances")) {
    SuiteEntry e;
    e.id = je.at("id");
    e.case_id = je.at("case");
    e.w_a = je.at("w_a");
    e.sigma = je.at("sigma");
    e.n = je.at("n");
    e.seed = je.at("seed");
    e.direct_path_present = je.at("direct_path_present");
    e.indirect_path_present = je.at("indirect_path_present");
    e.y_fair_degenerate = je.value("y_fair_degenerate", false);
    e.factual_file = je.at("factual_file");
    e.cf_file = je.at("cf_file");
    e.direct_file = je.at("direct_file");
    e.indirect_file = je.at("indirect_file");
    e.oracle_file = je.at("oracle_file");
    m.instances.push_back(std::move(e));
  }
  json hashable = manifest_to_json(m);
  m.hash = hex64(fnv1a64(hashable["instances"].dump()));
  return m;
}

SuiteManifest generate_suite(const SuiteConfig& config) {
  if (config.count_per_case < 1)
    throw std::invalid_argument("generate_suite: count_per_case must be >= 1");
  const fs::path dir(config.out_dir);
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path) && !config.force)
    throw std::runtime_error("generate_suite: " + manifest_path.string() +
                             " exists; pass force to overwrite");
  fs::create_directories(dir);

  Rng master(config.seed);
  struct Job {
    CaseStudyConfig cfg;
    std::string id;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < config.cases.size(); ++ci) {
    Rng case_rng = master.fork(1000 + ci);
    for (i64 k = 0; k < config.count_per_case; ++k) {
      CaseStudyConfig cc;
      cc.id = config.cases[ci];
      cc.w_a = case_rng.log_uniform(config.w_lo, config.w_hi);
      cc.n = static_cast<i64>(std::llround(case_rng.log_uniform(
          static_cast<double>(config.n_lo), static_cast<double>(config.n_hi))));
      cc.n = std::clamp<i64>(cc.n, config.n_lo, config.n_hi);
      cc.sigma = std::max(case_rng.log_uniform(config.sigma_lo, config.sigma_hi), config.sigma_lo);
      cc.seed = case_rng.next();
      jobs.push_back({cc, case_name(cc.id) + "_" + std::to_string(k)});
    }
  }

  std::vector<SuiteEntry> entries(jobs.size());
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Job& job = jobs[i];
      const CaseStudyInstance inst = generate_case(job.cfg);
      SuiteEntry e;
      e.id = job.id;
      e.case_id = case_name(job.cfg.id);
      e.w_a = job.cfg.w_a;
      e.sigma = job.cfg.sigma;
      e.n = job.cfg.n;
      e.seed = job.cfg.seed;
      e.direct_path_present = inst.direct_path_present;
      e.indirect_path_present = inst.indirect_path_present;
      e.y_fair_degenerate = inst.fair_info.y_fair_degenerate;
      e.factual_file = job.id + ".csv";
      e.cf_file = job.id + ".cf.csv";
      e.direct_file = job.id + ".direct.csv";
      e.indirect_file = job.id + ".indirect.csv";
      e.oracle_file = job.id + ".oracle.csv";

      Dataset factual = inst.factual;
      save_dataset(factual, (dir / e.factual_file).string());
      Dataset cf = inst.cf_twin;
      cf.meta.twin_of = e.factual_file;
      save_dataset(cf, (dir / e.cf_file).string());
      Dataset dt = inst.direct_twin;
      dt.meta.twin_of = e.factual_file;
      save_dataset(dt, (dir / e.direct_file).string());
      Dataset it = inst.indirect_twin;
      it.meta.twin_of = e.factual_file;
      save_dataset(it, (dir / e.indirect_file).string());
      save_fair_info(inst.fair_info, (dir / e.oracle_file).string());
      entries[i] = std::move(e);
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1 || jobs.size() < 2) {
    worker(0, jobs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (jobs.size() + threads - 1) / static_cast<std::size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      const std::size_t b = static_cast<std::size_t>(t) * chunk;
      const std::size_t e = std::min(jobs.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  SuiteManifest m;
  m.seed = config.seed;
  m.count_per_case = config.count_per_case;
  m.instances = std::move(entries);
  json hashable = manifest_to_json(m);
  m.hash = hex64(fnv1a64(hashable["instances"].dump()));
  save_manifest(m, manifest_path.string());
  return m;
}

}  // namespace fairpfn
