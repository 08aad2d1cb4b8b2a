// SPDX-License-Identifier: Apache-2.0
#include "agropanel/regress.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "agropanel/errors.hpp"

namespace agropanel {

namespace {

struct Absorption {
  std::vector<std::vector<int>> level_of;  // [fe][row]
  std::vector<int> n_levels;
};

long category_of(double v) { return std::lround(v * 4096.0); }

Absorption build_absorption(const PanelTable& panel,
                            const std::vector<std::string>& tokens) {
  Absorption a;
  for (const auto& token : tokens) {
    std::vector<int> levels(panel.n_rows());
    int count = 0;
    if (token == "unit") {
      std::map<std::string, int> ids;
      for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        auto [it, fresh] = ids.try_emplace(panel.unit_ids[i], count);
        if (fresh) ++count;
        levels[i] = it->second;
      }
    } else if (token == "year") {
      std::map<int, int> ids;
      for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        auto [it, fresh] = ids.try_emplace(panel.years[i], count);
        if (fresh) ++count;
        levels[i] = it->second;
      }
    } else if (auto star = token.find("*year"); star != std::string::npos &&
                                                star + 5 == token.size()) {
      const auto& col = panel.col(token.substr(0, star));
      std::map<std::pair<long, int>, int> ids;
      for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        auto [it, fresh] = ids.try_emplace(
            std::make_pair(category_of(col[i]), panel.years[i]), count);
        if (fresh) ++count;
        levels[i] = it->second;
      }
    } else {
      const auto& col = panel.col(token);
      std::map<long, int> ids;
      for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        auto [it, fresh] = ids.try_emplace(category_of(col[i]), count);
        if (fresh) ++count;
        levels[i] = it->second;
      }
    }
    a.level_of.push_back(std::move(levels));
    a.n_levels.push_back(count);
  }
  return a;
}

// Dimension of the absorbed dummy space. Exact for up to two factors (via
// connected components of the bipartite level graph); the conventional
// L1 + sum(Li - 1) upper bound beyond that.
int absorbed_dimension(const Absorption& a, std::size_t n_rows) {
  if (a.n_levels.empty()) return 0;
  if (a.n_levels.size() == 1) return a.n_levels[0];
  if (a.n_levels.size() == 2) {
    int total = a.n_levels[0] + a.n_levels[1];
    std::vector<int> parent(total);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < n_rows; ++i) {
      int u = find(a.level_of[0][i]);
      int v = find(a.n_levels[0] + a.level_of[1][i]);
      if (u != v) parent[u] = v;
    }
    std::set<int> roots;
    for (int x = 0; x < total; ++x) roots.insert(find(x));
    return total - static_cast<int>(roots.size());
  }
  int dim = a.n_levels[0];
  for (std::size_t f = 1; f < a.n_levels.size(); ++f) {
    dim += a.n_levels[f] - 1;
  }
  return dim;
}

// Alternating projections: demean every column of `m` within every factor's
// cells until the largest subtracted cell mean falls below 1e-10. The
// tolerance is relative to each column's initial magnitude; an absolute read
// would stall at machine precision for large-scale columns (a cubic
// precipitation term easily reaches 1e8).
void demean(Eigen::MatrixXd& m, const Absorption& a,
            const std::vector<double>& w) {
  if (a.n_levels.empty()) return;
  const std::size_t n = m.rows();
  const int cols = static_cast<int>(m.cols());
  Eigen::VectorXd scale(cols);
  for (int c = 0; c < cols; ++c) {
    scale[c] = std::max(1.0, m.col(c).cwiseAbs().maxCoeff());
  }
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double worst = 0;
    for (std::size_t f = 0; f < a.n_levels.size(); ++f) {
      const auto& level = a.level_of[f];
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(a.n_levels[f], cols);
      Eigen::VectorXd wsum = Eigen::VectorXd::Zero(a.n_levels[f]);
      for (std::size_t i = 0; i < n; ++i) {
        double wi = w.empty() ? 1.0 : w[i];
        sums.row(level[i]) += wi * m.row(i);
        wsum[level[i]] += wi;
      }
      for (int g = 0; g < a.n_levels[f]; ++g) {
        if (wsum[g] > 0) sums.row(g) /= wsum[g];
      }
      for (int c = 0; c < cols; ++c) {
        worst = std::max(worst, sums.col(c).cwiseAbs().maxCoeff() / scale[c]);
      }
      for (std::size_t i = 0; i < n; ++i) m.row(i) -= sums.row(level[i]);
    }
    if (worst < 1e-10) return;
  }
  throw ValidationError("fit_within: fixed-effect demeaning did not converge "
                        "within 10000 sweeps");
}

std::vector<std::string> trend_columns(PanelTable& panel, TrendSpec trends,
                                       const std::string& region_col) {
  std::vector<std::string> names;
  if (trends == TrendSpec::none) return names;
  int base = *std::min_element(panel.years.begin(), panel.years.end());
  std::vector<double> t(panel.n_rows());
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    t[i] = static_cast<double>(panel.years[i] - base);
  }
  if (trends == TrendSpec::pooled_quadratic) {
    auto& c1 = panel.add_column("trend_t");
    auto& c2 = panel.add_column("trend_t_sq");
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
      c1[i] = t[i];
      c2[i] = t[i] * t[i];
    }
    names = {"trend_t", "trend_t_sq"};
    return names;
  }
  if (region_col.empty()) {
    throw ValidationError("fit_within: by-region trends need a region column");
  }
  const auto region = panel.col(region_col);  // copy; add_column reallocates
  std::map<long, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    groups[category_of(region[i])].push_back(i);
  }
  int g = 0;
  for (const auto& [key, rows] : groups) {
    (void)key;
    std::string n1 = "trend_r" + std::to_string(g) + "_t";
    std::string n2 = "trend_r" + std::to_string(g) + "_t_sq";
    auto& c1 = panel.add_column(n1);
    for (auto i : rows) c1[i] = t[i];
    auto& c2 = panel.add_column(n2);
    for (auto i : rows) c2[i] = t[i] * t[i];
    names.push_back(n1);
    names.push_back(n2);
    ++g;
  }
  return names;
}

}  // namespace

FitResult fit_within(const PanelTable& panel_in, const ModelSpec& spec) {
  panel_in.validate();
  if (spec.regressors.empty()) {
    throw ValidationError("fit_within: no regressors given");
  }
  PanelTable panel = panel_in;
  std::vector<std::string> names = spec.regressors;
  for (auto& extra : trend_columns(panel, spec.trends, spec.region_col)) {
    names.push_back(extra);
  }

  const std::size_t n = panel.n_rows();
  const int j_count = static_cast<int>(names.size());
  if (n < static_cast<std::size_t>(j_count) + 1) {
    throw ValidationError("fit_within: fewer observations than parameters");
  }

  const std::vector<double>& outcome =
      spec.outcome == "y" ? panel.y : panel.col(spec.outcome);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = outcome[i];
    if (spec.log_outcome) {
      if (!(v > 0)) {
        throw ValidationError("fit_within: nonpositive outcome for (" +
                              panel.unit_ids[i] + "," +
                              std::to_string(panel.years[i]) + ")");
      }
      v = std::log(v);
    }
    y[i] = v;
  }

  Eigen::MatrixXd all(n, 1 + j_count);
  all.col(0) = y;
  std::vector<double> scale(j_count, 0.0);
  for (int j = 0; j < j_count; ++j) {
    const auto& c = panel.col(names[j]);
    for (std::size_t i = 0; i < n; ++i) {
      all(i, 1 + j) = c[i];
      scale[j] = std::max(scale[j], std::abs(c[i]));
    }
  }

  std::vector<double> w;
  if (!spec.weight_col.empty()) {
    w = panel.col(spec.weight_col);
    for (double wi : w) {
      if (!(wi > 0)) throw ValidationError("fit_within: weights must be > 0");
    }
  }

  Absorption a = build_absorption(panel, spec.fixed_effects);
  demean(all, a, w);

  if (!spec.fixed_effects.empty()) {
    for (int j = 0; j < j_count; ++j) {
      double maxabs = all.col(1 + j).cwiseAbs().maxCoeff();
      if (maxabs <= 1e-9 * std::max(scale[j], 1.0)) {
        throw ValidationError("fit_within: regressor '" + names[j] +
                              "' is constant within the absorbed effects");
      }
    }
  }

  Eigen::VectorXd ytil = all.col(0);
  Eigen::MatrixXd xtil = all.rightCols(j_count);
  if (!w.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = std::sqrt(w[i]);
      ytil[i] *= s;
      xtil.row(i) *= s;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtil);
  qr.setThreshold(1e-10);
  if (qr.rank() < j_count) {
    int dropped = qr.colsPermutation().indices()(qr.rank());
    throw ValidationError("fit_within: regressor '" + names[dropped] +
                          "' is collinear with the others");
  }

  FitResult fit;
  fit.gamma = qr.solve(ytil);
  fit.residuals = ytil - xtil * fit.gamma;
  fit.n_obs = n;
  fit.regressor_names = names;
  fit.absorbed_dims = absorbed_dimension(a, n);
  fit.dof = static_cast<double>(n) - j_count - fit.absorbed_dims;
  if (fit.dof <= 0) {
    throw ValidationError("fit_within: no residual degrees of freedom");
  }
  fit.xtil = std::move(xtil);
  fit.row_units = panel.unit_ids;
  fit.row_years = panel.years;

  double ssr = fit.residuals.squaredNorm();
  double mean_y = y.mean();
  double tss_raw = (y.array() - mean_y).square().sum();
  double tss_within = ytil.squaredNorm();
  // Uncentered total when the model has no constant direction at all.
  bool centered = !spec.fixed_effects.empty();
  for (int j = 0; !centered && j < j_count; ++j) {
    double lo = all.col(1 + j).minCoeff(), hi = all.col(1 + j).maxCoeff();
    centered = (hi - lo) <= 1e-12 * std::max(std::abs(hi), 1.0);
  }
  if (!centered) tss_raw = y.squaredNorm();
  fit.r2 = tss_raw > 0 ? 1.0 - ssr / tss_raw : 1.0;
  fit.r2_within = tss_within > 0 ? 1.0 - ssr / tss_within : 1.0;
  fit.adj_r2 =
      1.0 - (1.0 - fit.r2) * (static_cast<double>(n) - 1.0) / fit.dof;

  double sigma2 = ssr / fit.dof;
  Eigen::MatrixXd xtx = fit.xtil.transpose() * fit.xtil;
  fit.vgamma = sigma2 * xtx.ldlt().solve(
                            Eigen::MatrixXd::Identity(j_count, j_count));
  fit.se_type = "iid";
  return fit;
}

SpecBuild build_spec_quadratic(const PanelTable& panel,
                               const std::string& temp_col,
                               const std::string& precip_col,
                               TrendSpec trends,
                               const std::string& region_col) {
  SpecBuild out;
  out.panel = panel;
  const auto temp = out.panel.col(temp_col);
  const auto precip = out.panel.col(precip_col);
  auto& t2 = out.panel.add_column(temp_col + "_sq");
  for (std::size_t i = 0; i < out.panel.n_rows(); ++i) t2[i] = temp[i] * temp[i];
  auto& p2 = out.panel.add_column(precip_col + "_sq");
  for (std::size_t i = 0; i < out.panel.n_rows(); ++i) {
    p2[i] = precip[i] * precip[i];
  }
  out.spec.regressors = {temp_col, temp_col + "_sq", precip_col,
                         precip_col + "_sq"};
  out.spec.fixed_effects = {"unit"};
  out.spec.trends = trends;
  out.spec.region_col = region_col;
  return out;
}

double rolling_normal(const std::vector<std::pair<int, double>>& series,
                      int year, int window) {
  std::map<int, double> by_year;
  for (const auto& [yr, v] : series) {
    if (!by_year.emplace(yr, v).second) {
      throw ValidationError("rolling_normal: duplicate year " +
                            std::to_string(yr));
    }
  }
  double sum = 0;
  for (int yr = year - window; yr < year; ++yr) {
    auto it = by_year.find(yr);
    if (it == by_year.end()) {
      throw ValidationError("rolling_normal: missing year " +
                            std::to_string(yr) + " in the " +
                            std::to_string(window) + "-year window before " +
                            std::to_string(year));
    }
    sum += it->second;
  }
  return sum / window;
}

namespace {

// (unit, year) -> value lookup for one weather column.
std::map<std::pair<std::string, int>, double> weather_lookup(
    const PanelTable& weather, const std::string& var) {
  const auto& col = weather.col(var);
  std::map<std::pair<std::string, int>, double> out;
  for (std::size_t i = 0; i < weather.n_rows(); ++i) {
    out[{weather.unit_ids[i], weather.years[i]}] = col[i];
  }
  return out;
}

double unit_normal(const std::map<std::pair<std::string, int>, double>& lut,
                   const std::string& unit, int year, int window) {
  double sum = 0;
  for (int yr = year - window; yr < year; ++yr) {
    auto it = lut.find({unit, yr});
    if (it == lut.end()) {
      throw ValidationError("climate normal: unit " + unit + " lacks year " +
                            std::to_string(yr) + " in the history window");
    }
    sum += it->second;
  }
  return sum / window;
}

}  // namespace

SpecBuild build_spec_ricardian(const PanelTable& cross_section,
                               const PanelTable& weather_history,
                               const std::string& var, int window) {
  weather_history.validate();
  auto lut = weather_lookup(weather_history, var);

  SpecBuild out;
  out.panel = cross_section;
  auto& znorm = out.panel.add_column(var + "_normal");
  auto& znorm2 = out.panel.add_column(var + "_normal_sq");
  for (std::size_t i = 0; i < out.panel.n_rows(); ++i) {
    double zb = unit_normal(lut, out.panel.unit_ids[i], out.panel.years[i],
                            window);
    znorm[i] = zb;
    znorm2[i] = zb * zb;
  }
  out.spec.regressors = {var + "_normal", var + "_normal_sq"};
  for (const auto& c : cross_section.columns) {
    out.spec.regressors.push_back(c);  // controls carried through
  }
  out.spec.fixed_effects = {"year"};
  return out;
}

SpecBuild build_spec_hybrid(const PanelTable& panel,
                            const PanelTable& weather_history,
                            const std::string& var,
                            const std::string& region_col, int window) {
  auto lut = weather_lookup(weather_history, var);

  SpecBuild out;
  out.panel = panel;
  const auto w = out.panel.col(var);
  auto& nbar = out.panel.add_column(var + "_normal");
  auto& nbar2 = out.panel.add_column(var + "_normal_sq");
  auto& anom2 = out.panel.add_column(var + "_anom_sq");
  for (std::size_t i = 0; i < out.panel.n_rows(); ++i) {
    double zb = unit_normal(lut, out.panel.unit_ids[i], out.panel.years[i],
                            window);
    nbar[i] = zb;
    nbar2[i] = zb * zb;
    double d = w[i] - zb;
    anom2[i] = d * d;
  }
  out.spec.regressors = {var + "_normal", var + "_normal_sq",
                         var + "_anom_sq"};
  out.spec.fixed_effects = {region_col};
  out.spec.trends = TrendSpec::by_region_quadratic;
  out.spec.region_col = region_col;
  return out;
}

LongDifference long_difference(const PanelTable& panel, int a_lo, int a_hi,
                               int b_lo, int b_hi,
                               const std::vector<std::string>& weather_cols) {
  if (a_lo > a_hi || b_lo > b_hi) {
    throw ValidationError("long_difference: empty year range");
  }
  if (std::max(a_lo, b_lo) <= std::min(a_hi, b_hi)) {
    throw ValidationError("long_difference: year ranges overlap");
  }
  panel.validate();

  struct Acc {
    double y_sum = 0;
    std::vector<double> z_sum;
    int n = 0;
  };
  std::map<std::string, std::pair<Acc, Acc>> acc;
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    int yr = panel.years[i];
    bool in_a = yr >= a_lo && yr <= a_hi;
    bool in_b = yr >= b_lo && yr <= b_hi;
    if (!in_a && !in_b) continue;
    auto& pair = acc[panel.unit_ids[i]];
    Acc& side = in_a ? pair.first : pair.second;
    if (side.z_sum.empty()) side.z_sum.assign(weather_cols.size(), 0.0);
    side.y_sum += panel.y[i];
    for (std::size_t c = 0; c < weather_cols.size(); ++c) {
      side.z_sum[c] += panel.col(weather_cols[c])[i];
    }
    side.n += 1;
  }

  LongDifference out;
  out.table.columns.clear();
  for (const auto& c : weather_cols) {
    out.table.add_column(c + "_diff");
    out.table.add_column(c + "_sq_diff");
  }
  for (const auto& [unit, sides] : acc) {
    const auto& [a, b] = sides;
    if (a.n == 0 || b.n == 0) {
      ++out.n_dropped;
      continue;
    }
    out.table.unit_ids.push_back(unit);
    out.table.years.push_back(0);
    out.table.y.push_back(b.y_sum / b.n - a.y_sum / a.n);
    for (std::size_t c = 0; c < weather_cols.size(); ++c) {
      double za = a.z_sum[c] / a.n;
      double zb = b.z_sum[c] / b.n;
      out.table.data[2 * c].push_back(zb - za);
      out.table.data[2 * c + 1].push_back(zb * zb - za * za);
    }
  }
  return out;
}

namespace {

Impact linear_combination(const FitResult& fit, const Eigen::VectorXd& c) {
  Impact out;
  out.estimate = c.dot(fit.gamma);
  double var = c.dot(fit.vgamma * c);
  out.se = std::sqrt(var > 0 ? var : 0.0);
  return out;
}

}  // namespace

Impact warming_impact_polynomial(const FitResult& fit, const PanelTable& panel,
                                 const std::string& temp_col, double delta) {
  const auto& t = panel.col(temp_col);
  const std::size_t n = t.size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.gamma.size());
  const std::pair<std::string, int> powers[] = {
      {temp_col, 1}, {temp_col + "_sq", 2}, {temp_col + "_cu", 3}};
  bool any = false;
  for (const auto& [name, p] : powers) {
    auto it = std::find(fit.regressor_names.begin(),
                        fit.regressor_names.end(), name);
    if (it == fit.regressor_names.end()) continue;
    any = true;
    double mean_delta = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mean_delta += std::pow(t[i] + delta, p) - std::pow(t[i], p);
    }
    c[it - fit.regressor_names.begin()] = mean_delta / static_cast<double>(n);
  }
  if (!any) {
    throw ValidationError("warming impact: fit has no '" + temp_col +
                          "' terms");
  }
  return linear_combination(fit, c);
}

std::vector<double> shift_exposure(const std::vector<double>& z, int shift) {
  const int k_count = static_cast<int>(z.size());
  std::vector<double> out(z.size(), 0.0);
  for (int k = 0; k < k_count; ++k) {
    int dst = std::clamp(k + shift, 0, k_count - 1);
    out[dst] += z[k];
  }
  return out;
}

Impact warming_impact_binned(const FitResult& fit, const Eigen::MatrixXd& z,
                             const BasisMatrix& basis, double bin_width,
                             double delta) {
  double steps = delta / bin_width;
  if (std::abs(steps - std::lround(steps)) > 1e-9) {
    throw ValidationError("warming impact: delta must be a whole number of "
                          "bin widths");
  }
  int shift = static_cast<int>(std::lround(steps));
  if (z.cols() != basis.K()) {
    throw ShapeError("warming impact: exposure columns do not match basis");
  }
  if (fit.gamma.size() < basis.J()) {
    throw ShapeError("warming impact: fit has fewer coefficients than basis "
                     "columns");
  }

  Eigen::RowVectorXd mean_dx = Eigen::RowVectorXd::Zero(basis.J());
  std::vector<double> row(basis.K());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (int k = 0; k < basis.K(); ++k) row[k] = z(i, k);
    auto shifted = shift_exposure(row, shift);
    Eigen::RowVectorXd dz(basis.K());
    for (int k = 0; k < basis.K(); ++k) dz[k] = shifted[k] - row[k];
    mean_dx += dz * basis.values;
  }
  mean_dx /= static_cast<double>(z.rows());

  Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.gamma.size());
  c.head(basis.J()) = mean_dx.transpose();
  return linear_combination(fit, c);
}

Eigen::MatrixXd attach_basis_columns(PanelTable& panel, const BinsTable& bins,
                                     const BasisMatrix& basis,
                                     const std::string& prefix) {
  if (bins.n_bins != basis.K()) {
    throw ShapeError("attach_basis_columns: bin count does not match basis");
  }
  std::map<std::pair<std::string, std::string>, const ExposureBins*> lut;
  for (const auto& b : bins.rows) lut[{b.unit_id, b.period}] = &b;

  Eigen::MatrixXd z(panel.n_rows(), bins.n_bins);
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    auto it = lut.find({panel.unit_ids[i], std::to_string(panel.years[i])});
    if (it == lut.end()) {
      throw ValidationError("attach_basis_columns: no exposure row for (" +
                            panel.unit_ids[i] + "," +
                            std::to_string(panel.years[i]) + ")");
    }
    for (int k = 0; k < bins.n_bins; ++k) z(i, k) = it->second->z[k];
  }
  Eigen::MatrixXd x = reduce(z, basis);
  for (int j = 0; j < basis.J(); ++j) {
    auto& col = panel.add_column(prefix + std::to_string(j));
    for (std::size_t i = 0; i < panel.n_rows(); ++i) col[i] = x(i, j);
  }
  return z;
}

}  // namespace agropanel
