// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "agropanel/grid.hpp"
#include "agropanel/tables.hpp"

namespace agropanel {

/// Sparse row-stochastic aggregation matrix mapping grid cells to units,
/// compressed-row in memory, `unit_id,cell_index,weight` triplets on disk.
/// Rows with no coverage are empty and flagged; all other rows sum to 1.
class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;

  /// Builds from per-row triplets. Weights must be positive, (row, col)
  /// pairs unique; rows are normalized to sum exactly 1.
  static ProjectionMatrix from_triplets(
      std::vector<std::string> unit_ids, std::size_t n_cells,
      const std::vector<std::tuple<std::size_t, std::size_t, double>>& entries);

  std::size_t n_units() const { return unit_ids_.size(); }
  std::size_t n_cells() const { return n_cells_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  bool row_empty(std::size_t u) const {
    return row_ptr_[u] == row_ptr_[u + 1];
  }
  std::size_t nnz() const { return cols_.size(); }

  /// Weighted row sums of a single layer. Nodata cells are skipped and the
  /// remaining weights renormalized; rows with no usable cell yield NaN.
  void project_layer(std::span<const double> layer, double nodata,
                     std::span<double> out) const;

  /// A = P x G over all layers; result indexed [unit][layer].
  std::vector<std::vector<double>> project(const GridStack& stack) const;

  void validate() const;

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& cols() const { return cols_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<std::string> unit_ids_;
  std::size_t n_cells_ = 0;
  std::vector<std::size_t> row_ptr_;  // n_units + 1
  std::vector<std::size_t> cols_;
  std::vector<double> weights_;
};

ProjectionMatrix read_projection_csv(const std::string& path,
                                     std::size_t n_cells);
void write_projection_csv(const ProjectionMatrix& p, const std::string& path);

/// Fraction of fine cells equal to `class_code` inside each coarse cell.
/// The fine raster must tile the coarse one exactly (integer resolution
/// ratio, aligned extents).
Grid zonal_fractions(const Grid& fine, const Grid& coarse_header,
                     int class_code);

/// Unit membership weights times a per-cell weight grid (e.g. cropland
/// fractions), row-normalized. Units whose cells carry zero total weight get
/// an empty, flagged row.
ProjectionMatrix build_projection(const AdminUnits& units,
                                  const Grid& weight_grid);

}  // namespace agropanel
