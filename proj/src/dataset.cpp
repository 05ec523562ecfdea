#include "fairpfn/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "fairpfn/csv.hpp"

namespace fairpfn {

using nlohmann::json;

std::string sidecar_path(const std::string& csv_path) {
  if (csv_path.size() >= 4 && csv_path.substr(csv_path.size() - 4) == ".csv")
    return csv_path.substr(0, csv_path.size() - 4) + ".json";
  return csv_path + ".json";
}

void save_dataset(const Dataset& d, const std::string& csv_path) {
  if (d.n() != d.features.rows() || d.n() != static_cast<i64>(d.labels.size()))
    throw std::invalid_argument("save_dataset: inconsistent row counts");
  CsvTable t;
  t.header.push_back("A");
  for (i64 j = 0; j < d.m(); ++j) t.header.push_back("x" + std::to_string(j + 1));
  t.header.push_back("y");
  t.rows.reserve(static_cast<std::size_t>(d.n()));
  for (i64 i = 0; i < d.n(); ++i) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    row.push_back(std::to_string(d.groups[static_cast<std::size_t>(i)]));
    for (i64 j = 0; j < d.m(); ++j) row.push_back(format_double(d.features.at(i, j)));
    row.push_back(std::to_string(d.labels[static_cast<std::size_t>(i)]));
    t.rows.push_back(std::move(row));
  }
  write_csv(csv_path, t);

  json side;
  side["schema_version"] = d.meta.schema_version;
  side["protected"] = "A";
  side["target"] = "y";
  side["seed"] = d.meta.seed;
  side["scm_hash"] = d.meta.scm_hash;
  side["a0"] = d.meta.a0;
  side["a1"] = d.meta.a1;
  side["twin_of"] = d.meta.twin_of;
  side["noise_file"] = d.meta.noise_file;
  side["threshold"] = d.meta.threshold;
  side["mode"] = d.meta.mode;
  side["degenerate_labels"] = d.meta.degenerate_labels;
  side["n"] = d.n();
  side["m"] = d.m();
  std::ofstream out(sidecar_path(csv_path));
  if (!out) throw std::runtime_error("save_dataset: cannot write sidecar for " + csv_path);
  out << side.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path) {
  const CsvTable t = read_csv(csv_path);
  if (t.header.size() < 2 || t.header.front() != "A" || t.header.back() != "y")
    throw std::runtime_error("load_dataset: unexpected header in " + csv_path);
  const i64 m = static_cast<i64>(t.header.size()) - 2;
  Dataset d;
  d.features = Tensor::zeros({static_cast<i64>(t.n_rows()), m});
  d.groups.reserve(t.n_rows());
  d.labels.reserve(t.n_rows());
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    const auto& row = t.rows[r];
    d.groups.push_back(row[0] == "1" ? 1 : 0);
    for (i64 j = 0; j < m; ++j)
      d.features.at(static_cast<i64>(r), j) = parse_double(row[static_cast<std::size_t>(j + 1)]);
    d.labels.push_back(row.back() == "1" ? 1 : 0);
  }

  std::ifstream in(sidecar_path(csv_path));
  if (in) {
    json side = json::parse(in);
    d.meta.schema_version = side.value("schema_version", 1);
    d.meta.seed = side.value("seed", std::uint64_t{0});
    d.meta.scm_hash = side.value("scm_hash", "");
    d.meta.a0 = side.value("a0", 0.0);
    d.meta.a1 = side.value("a1", 1.0);
    d.meta.twin_of = side.value("twin_of", "");
    d.meta.noise_file = side.value("noise_file", "");
    d.meta.threshold = side.value("threshold", 0.0);
    d.meta.mode = side.value("mode", "");
    d.meta.degenerate_labels = side.value("degenerate_labels", false);
  }
  return d;
}

void save_noise(const NoiseDraw& nd, const std::string& csv_path) {
  CsvTable t;
  t.header.push_back("group");
  for (i64 j = 0; j < nd.z.cols(); ++j) t.header.push_back("z" + std::to_string(j + 1));
  for (i64 i = 0; i < nd.z.rows(); ++i) {
    std::vector<std::string> row;
    row.push_back(std::to_string(nd.groups[static_cast<std::size_t>(i)]));
    for (i64 j = 0; j < nd.z.cols(); ++j) row.push_back(format_double(nd.z.at(i, j)));
    t.rows.push_back(std::move(row));
  }
  write_csv(csv_path, t);
}

NoiseDraw load_noise(const std::string& csv_path) {
  const CsvTable t = read_csv(csv_path);
  if (t.header.empty() || t.header.front() != "group")
    throw std::runtime_error("load_noise: unexpected header in " + csv_path);
  NoiseDraw nd;
  const i64 k = static_cast<i64>(t.header.size()) - 1;
  nd.z = Tensor::zeros({static_cast<i64>(t.n_rows()), k});
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    nd.groups.push_back(t.rows[r][0] == "1" ? 1 : 0);
    for (i64 j = 0; j < k; ++j)
      nd.z.at(static_cast<i64>(r), j) = parse_double(t.rows[r][static_cast<std::size_t>(j + 1)]);
  }
  return nd;
}

}  // namespace fairpfn
