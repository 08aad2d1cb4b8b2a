// SPDX-License-Identifier: Apache-2.0
#include "agropanel/grid.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

Grid Grid::like() const {
  Grid g = *this;
  g.values.assign(size(), nodata);
  return g;
}

bool Grid::same_header(const Grid& other, double tol) const {
  return ncols == other.ncols && nrows == other.nrows &&
         std::abs(xll - other.xll) <= tol && std::abs(yll - other.yll) <= tol &&
         std::abs(cellsize - other.cellsize) <= tol;
}

void Grid::validate() const {
  if (ncols <= 0 || nrows <= 0) {
    throw ValidationError("grid: ncols and nrows must be positive");
  }
  if (!(cellsize > 0)) throw ValidationError("grid: cellsize must be > 0");
  if (values.size() != size()) {
    throw ValidationError("grid: expected " + std::to_string(size()) +
                          " values, got " + std::to_string(values.size()));
  }
  for (double v : values) {
    if (v != nodata && !std::isfinite(v)) {
      throw ValidationError("grid: non-finite value outside nodata");
    }
  }
}

void GridStack::validate() const {
  if (layers.empty()) throw ValidationError("stack: needs at least one layer");
  if (labels.size() != layers.size()) {
    throw ValidationError("stack: label/layer count mismatch");
  }
  for (const auto& l : layers) {
    if (l.size() != header.size()) {
      throw ValidationError("stack: layer length does not match header");
    }
  }
  for (std::size_t i = 1; i < labels.size(); ++i) {
    if (!(labels[i - 1] < labels[i])) {
      throw ValidationError("stack: labels not strictly increasing at '" +
                            labels[i] + "'");
    }
  }
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string dirname(const std::string& path) {
  auto pos = path.find_last_of('/');
  return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

}  // namespace

Grid read_ascii_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  // Header: six `key value` lines, keys case-insensitive.
  struct Item {
    const char* key;
    bool seen = false;
    double value = 0.0;
  };
  Item items[] = {{"ncols"},     {"nrows"},    {"xllcorner"},
                  {"yllcorner"}, {"cellsize"}, {"nodata_value"}};
  for (int i = 0; i < 6; ++i) {
    std::string key;
    double value;
    if (!(in >> key >> value)) {
      for (const auto& it : items) {
        if (!it.seen) {
          throw ParseError(path + ": missing header key " + it.key);
        }
      }
      throw ParseError(path + ": malformed header");
    }
    key = lower(key);
    bool matched = false;
    for (auto& it : items) {
      if (key == it.key) {
        it.seen = true;
        it.value = value;
        matched = true;
        break;
      }
    }
    if (!matched) throw ParseError(path + ": unknown header key " + key);
  }
  for (const auto& it : items) {
    if (!it.seen) throw ParseError(path + ": missing header key " + it.key);
  }

  Grid g;
  g.ncols = static_cast<int>(items[0].value);
  g.nrows = static_cast<int>(items[1].value);
  g.xll = items[2].value;
  g.yll = items[3].value;
  g.cellsize = items[4].value;
  g.nodata = items[5].value;
  if (g.ncols <= 0 || g.nrows <= 0) {
    throw ParseError(path + ": ncols/nrows must be positive");
  }

  g.values.reserve(g.size());
  double v;
  while (in >> v) g.values.push_back(v);
  if (g.values.size() != g.size()) {
    throw ParseError(path + ": expected " + std::to_string(g.size()) +
                     " values, got " + std::to_string(g.values.size()));
  }
  g.validate();
  return g;
}

void write_ascii_grid(const Grid& grid, const std::string& path) {
  grid.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "NCOLS " << grid.ncols << '\n';
  out << "NROWS " << grid.nrows << '\n';
  out << "XLLCORNER " << csv::format_double(grid.xll) << '\n';
  out << "YLLCORNER " << csv::format_double(grid.yll) << '\n';
  out << "CELLSIZE " << csv::format_double(grid.cellsize) << '\n';
  out << "NODATA_VALUE " << csv::format_double(grid.nodata) << '\n';
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      if (c) out << ' ';
      out << csv::format_double(grid.at(r, c));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

GridStack read_stack(const std::string& manifest_path) {
  auto table = csv::read_file(manifest_path);
  if (table.header != std::vector<std::string>{"layer_index", "label", "path"}) {
    throw ParseError(manifest_path +
                     ": manifest header must be layer_index,label,path");
  }
  std::string base = dirname(manifest_path);
  GridStack stack;
  long expect = 0;
  for (const auto& row : table.rows) {
    long idx = csv::parse_long(row[0], manifest_path);
    if (idx != expect++) {
      throw ParseError(manifest_path + ": layer_index must run 0,1,2,...");
    }
    std::string layer_path = row[2];
    if (!layer_path.empty() && layer_path[0] != '/') {
      layer_path = base + "/" + layer_path;
    }
    Grid g = read_ascii_grid(layer_path);
    if (stack.layers.empty()) {
      stack.header = g;
      stack.header.values.clear();
    } else if (!g.same_header(stack.header)) {
      throw ShapeError(layer_path + ": header differs from first layer");
    }
    stack.labels.push_back(row[1]);
    stack.layers.push_back(std::move(g.values));
  }
  stack.validate();
  return stack;
}

void write_stack(const GridStack& stack, const std::string& manifest_path,
                 const std::string& layer_prefix) {
  stack.validate();
  csv::Table manifest;
  manifest.header = {"layer_index", "label", "path"};
  for (std::size_t t = 0; t < stack.n_layers(); ++t) {
    std::string name = layer_prefix + "_" + std::to_string(t) + ".asc";
    Grid g = stack.header;
    g.values = stack.layers[t];
    write_ascii_grid(g, dirname(manifest_path) + "/" + name);
    manifest.rows.push_back({std::to_string(t), stack.labels[t], name});
  }
  csv::write_file(manifest_path, manifest);
}

}  // namespace agropanel
