// SPDX-License-Identifier: Apache-2.0
#include "agropanel/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

ProjectionMatrix ProjectionMatrix::from_triplets(
    std::vector<std::string> unit_ids, std::size_t n_cells,
    const std::vector<std::tuple<std::size_t, std::size_t, double>>& entries) {
  ProjectionMatrix p;
  p.unit_ids_ = std::move(unit_ids);
  p.n_cells_ = n_cells;
  const std::size_t n = p.unit_ids_.size();

  std::vector<std::size_t> counts(n, 0);
  for (const auto& [row, col, w] : entries) {
    if (row >= n) throw ValidationError("projection: unit row out of range");
    if (col >= n_cells) {
      throw ValidationError("projection: cell index " + std::to_string(col) +
                            " out of range");
    }
    if (!(w > 0)) {
      throw ValidationError("projection: weights must be positive");
    }
    ++counts[row];
  }
  p.row_ptr_.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) p.row_ptr_[u + 1] = p.row_ptr_[u] + counts[u];
  p.cols_.resize(entries.size());
  p.weights_.resize(entries.size());
  std::vector<std::size_t> next(p.row_ptr_.begin(), p.row_ptr_.end() - 1);
  for (const auto& [row, col, w] : entries) {
    std::size_t slot = next[row]++;
    p.cols_[slot] = col;
    p.weights_[slot] = w;
  }
  // Sort each row by column, reject duplicates, normalize to unit sum.
  for (std::size_t u = 0; u < n; ++u) {
    std::size_t b = p.row_ptr_[u], e = p.row_ptr_[u + 1];
    std::vector<std::pair<std::size_t, double>> row(e - b);
    for (std::size_t i = b; i < e; ++i) row[i - b] = {p.cols_[i], p.weights_[i]};
    std::sort(row.begin(), row.end());
    double sum = 0;
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i].first == row[i - 1].first) {
        throw ValidationError("projection: duplicate entry for unit " +
                              p.unit_ids_[u] + ", cell " +
                              std::to_string(row[i].first));
      }
    }
    for (const auto& [c, w] : row) sum += w;
    for (std::size_t i = b; i < e; ++i) {
      p.cols_[i] = row[i - b].first;
      p.weights_[i] = row[i - b].second / sum;
    }
  }
  return p;
}

void ProjectionMatrix::validate() const {
  for (std::size_t u = 0; u < n_units(); ++u) {
    double sum = 0;
    for (std::size_t i = row_ptr_[u]; i < row_ptr_[u + 1]; ++i) {
      sum += weights_[i];
    }
    if (!row_empty(u) && std::abs(sum - 1.0) > 1e-12) {
      throw ValidationError("projection: row " + unit_ids_[u] +
                            " does not sum to 1");
    }
  }
}

void ProjectionMatrix::project_layer(std::span<const double> layer,
                                     double nodata,
                                     std::span<double> out) const {
  if (layer.size() != n_cells_) {
    throw ShapeError("project: layer has " + std::to_string(layer.size()) +
                     " cells, matrix expects " + std::to_string(n_cells_));
  }
  if (out.size() != n_units()) throw ShapeError("project: bad output length");
  const double* v = layer.data();
  for (std::size_t u = 0; u < n_units(); ++u) {
    double acc = 0, wsum = 0;
    for (std::size_t i = row_ptr_[u]; i < row_ptr_[u + 1]; ++i) {
      double x = v[cols_[i]];
      if (x != nodata) {
        acc += weights_[i] * x;
        wsum += weights_[i];
      }
    }
    out[u] = wsum > 0 ? acc / wsum : std::numeric_limits<double>::quiet_NaN();
  }
}

std::vector<std::vector<double>> ProjectionMatrix::project(
    const GridStack& stack) const {
  stack.validate();
  // Conformability is settled here; the parallel region must not throw.
  if (stack.header.size() != n_cells_) {
    throw ShapeError("project: stack has " +
                     std::to_string(stack.header.size()) +
                     " cells, matrix expects " + std::to_string(n_cells_));
  }
  std::vector<std::vector<double>> a(n_units(),
                                     std::vector<double>(stack.n_layers()));
  const auto n_layers = static_cast<std::ptrdiff_t>(stack.n_layers());
  // Layers are independent and each row reduces left to right, so the
  // result does not depend on the schedule.
#pragma omp parallel
  {
    std::vector<double> buf(n_units());
#pragma omp for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < n_layers; ++t) {
      project_layer(stack.layers[t], stack.header.nodata, buf);
      for (std::size_t u = 0; u < n_units(); ++u) a[u][t] = buf[u];
    }
  }
  return a;
}

ProjectionMatrix read_projection_csv(const std::string& path,
                                     std::size_t n_cells) {
  AdminUnits au = read_admin_weights_csv(path);
  std::vector<std::string> ids;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  for (std::size_t u = 0; u < au.units.size(); ++u) {
    ids.push_back(au.units[u].unit_id);
    for (const auto& [cell, w] : au.units[u].cell_weights) {
      entries.emplace_back(u, static_cast<std::size_t>(cell), w);
    }
  }
  return ProjectionMatrix::from_triplets(std::move(ids), n_cells, entries);
}

void write_projection_csv(const ProjectionMatrix& p, const std::string& path) {
  csv::Table t;
  t.header = {"unit_id", "cell_index", "weight"};
  for (std::size_t u = 0; u < p.n_units(); ++u) {
    for (std::size_t i = p.row_ptr()[u]; i < p.row_ptr()[u + 1]; ++i) {
      t.rows.push_back({p.unit_ids()[u], std::to_string(p.cols()[i]),
                        csv::format_double(p.weights()[i])});
    }
  }
  csv::write_file(path, t);
}

Grid zonal_fractions(const Grid& fine, const Grid& coarse_header,
                     int class_code) {
  fine.validate();
  double ratio_d = coarse_header.cellsize / fine.cellsize;
  long ratio = std::lround(ratio_d);
  if (ratio < 1 || std::abs(ratio_d - static_cast<double>(ratio)) >
                       1e-9 * ratio_d) {
    throw ShapeError("zonal: coarse cellsize is not an integer multiple of "
                     "fine cellsize");
  }
  double tol = 1e-6 * fine.cellsize;
  if (std::abs(fine.xll - coarse_header.xll) > tol ||
      std::abs(fine.yll - coarse_header.yll) > tol ||
      fine.ncols != coarse_header.ncols * ratio ||
      fine.nrows != coarse_header.nrows * ratio) {
    throw ShapeError("zonal: fine and coarse extents are not aligned");
  }

  Grid out = coarse_header.like();
  const double denom = static_cast<double>(ratio) * static_cast<double>(ratio);
  for (int r = 0; r < coarse_header.nrows; ++r) {
    for (int c = 0; c < coarse_header.ncols; ++c) {
      long count = 0;
      for (long fr = r * ratio; fr < (r + 1) * ratio; ++fr) {
        for (long fc = c * ratio; fc < (c + 1) * ratio; ++fc) {
          double v = fine.at(static_cast<int>(fr), static_cast<int>(fc));
          if (!fine.is_nodata(v) &&
              std::lround(v) == static_cast<long>(class_code)) {
            ++count;
          }
        }
      }
      out.values[out.index(r, c)] = static_cast<double>(count) / denom;
    }
  }
  return out;
}

ProjectionMatrix build_projection(const AdminUnits& units,
                                  const Grid& weight_grid) {
  weight_grid.validate();
  std::vector<std::string> ids;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
  for (std::size_t u = 0; u < units.units.size(); ++u) {
    const auto& unit = units.units[u];
    ids.push_back(unit.unit_id);
    for (const auto& [cell, membership] : unit.cell_weights) {
      if (cell < 0 || static_cast<std::size_t>(cell) >= weight_grid.size()) {
        throw ValidationError("unit " + unit.unit_id + ": cell index " +
                              std::to_string(cell) + " out of grid bounds");
      }
      double g = weight_grid.values[static_cast<std::size_t>(cell)];
      if (weight_grid.is_nodata(g)) continue;
      if (g < 0) {
        throw ValidationError("build_projection: negative weight at cell " +
                              std::to_string(cell));
      }
      double w = membership * g;
      if (w > 0) {
        entries.emplace_back(u, static_cast<std::size_t>(cell), w);
      }
    }
  }
  return ProjectionMatrix::from_triplets(std::move(ids), weight_grid.size(),
                                         entries);
}

}  // namespace agropanel
