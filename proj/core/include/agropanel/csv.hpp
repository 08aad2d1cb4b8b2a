// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace agropanel::csv {

// Minimal CSV support for the artifact's file formats: comma-separated, no
// quoting (none of the schemas carry free text), '\n' or '\r\n' line ends.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index for `name`, or -1.
  int column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table read_string(const std::string& text);

void write_file(const std::string& path, const Table& table);

/// Shortest decimal form that round-trips a 64-bit real (17 significant
/// digits).
std::string format_double(double v);

double parse_double(const std::string& s, const std::string& context);
long parse_long(const std::string& s, const std::string& context);

}  // namespace agropanel::csv
