#pragma once

#include <string>
#include <vector>

namespace fairpfn {

/// Minimal CSV support for the plain numeric tables this project reads and
/// writes. No quoting or embedded separators; cells are trimmed.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
  std::size_t n_rows() const { return rows.size(); }
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Round-trippable double formatting (shortest form via %.17g).
std::string format_double(double v);
double parse_double(const std::string& s, bool* ok = nullptr);

}  // namespace fairpfn
