// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "agropanel/geo.hpp"

namespace agropanel {

/// Georeferenced raster layer. Values are row-major with the first row being
/// the northernmost; coordinates are plain lat-lon degrees (no projection).
struct Grid {
  int ncols = 0;
  int nrows = 0;
  double xll = 0.0;       // longitude of the lower-left corner
  double yll = 0.0;       // latitude of the lower-left corner
  double cellsize = 0.0;  // degrees
  double nodata = -9999.0;
  std::vector<double> values;

  std::size_t size() const {
    return static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows);
  }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * ncols + col;
  }
  double at(int row, int col) const { return values[index(row, col)]; }
  bool is_nodata(double v) const { return v == nodata; }

  /// Center of cell (row, col); row 0 is the northernmost.
  LatLon cell_center(int row, int col) const {
    return {yll + (nrows - row - 0.5) * cellsize, xll + (col + 0.5) * cellsize};
  }

  /// Header-only copy (same geometry, values filled with nodata).
  Grid like() const;

  bool same_header(const Grid& other, double tol = 1e-9) const;

  /// Throws ValidationError when an invariant is broken.
  void validate() const;
};

/// Multi-layer raster sharing one Grid header. Labels are ISO dates or
/// "YYYY-MM" period identifiers and must be strictly increasing.
struct GridStack {
  Grid header;  // values member unused
  std::vector<std::vector<double>> layers;
  std::vector<std::string> labels;

  std::size_t n_layers() const { return layers.size(); }
  void validate() const;
};

Grid read_ascii_grid(const std::string& path);
void write_ascii_grid(const Grid& grid, const std::string& path);

/// Manifest CSV (`layer_index,label,path`) referencing one .asc per layer.
/// Relative layer paths are resolved against the manifest's directory.
GridStack read_stack(const std::string& manifest_path);
void write_stack(const GridStack& stack, const std::string& manifest_path,
                 const std::string& layer_prefix);

}  // namespace agropanel
