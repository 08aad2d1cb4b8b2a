// SPDX-License-Identifier: Apache-2.0
//
// agropanel: weather-to-panel econometrics pipeline in one binary.
// Subcommands cover interpolation, raster aggregation, exposure bins,
// degree days, panel estimation, inference, placebo tests and the
// specification chart. Model outputs are JSON, tables are CSV, charts SVG;
// every invocation writes a run manifest next to its outputs.

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "agropanel/aggregate.hpp"
#include "agropanel/basis.hpp"
#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"
#include "agropanel/grid.hpp"
#include "agropanel/inference.hpp"
#include "agropanel/interpolate.hpp"
#include "agropanel/regress.hpp"
#include "agropanel/speccurve.hpp"
#include "agropanel/synth.hpp"
#include "agropanel/tables.hpp"
#include "agropanel/thermal.hpp"

using nlohmann::json;
using namespace agropanel;

namespace {

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Run manifests
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

struct ManifestWriter {
  std::string command_line;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> seed;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const std::string& primary_output) const {
    json m;
    m["command"] = command_line;
    m["tool_version"] = kVersion;
    json hashes = json::object();
    for (const auto& p : inputs) {
      char hex[24];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(fnv1a64_file(p)));
      hashes[p] = hex;
    }
    m["input_hashes"] = hashes;
    if (seed) m["seed"] = *seed;
    m["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream out(primary_output + ".manifest.json");
    if (!out) throw IoError("cannot write manifest for " + primary_output);
    out << m.dump(2) << "\n";
  }
};

std::string join_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

// `unit_id,label,value` series files (projection output, daily unit series).
struct UnitSeries {
  std::vector<std::string> units;  // first-appearance order
  std::map<std::string, std::vector<std::pair<std::string, double>>> rows;
};

UnitSeries read_unit_series(const std::string& path) {
  auto t = csv::read_file(path);
  if (t.header != std::vector<std::string>{"unit_id", "label", "value"}) {
    throw ParseError(path + ": header must be unit_id,label,value");
  }
  UnitSeries s;
  for (const auto& row : t.rows) {
    auto it = s.rows.find(row[0]);
    if (it == s.rows.end()) {
      s.units.push_back(row[0]);
      it = s.rows.emplace(row[0], decltype(it->second){}).first;
    }
    it->second.emplace_back(row[1], csv::parse_double(row[2], path));
  }
  return s;
}

int month_of(const std::string& iso) {
  if (iso.size() < 7) throw ParseError("bad date label '" + iso + "'");
  return std::stoi(iso.substr(5, 2));
}

int year_of(const std::string& iso) {
  if (iso.size() < 4) throw ParseError("bad date label '" + iso + "'");
  return std::stoi(iso.substr(0, 4));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

TrendSpec parse_trend(const std::string& s) {
  if (s == "none") return TrendSpec::none;
  if (s == "pooled-quadratic") return TrendSpec::pooled_quadratic;
  if (s == "state-quadratic" || s == "region-quadratic") {
    return TrendSpec::by_region_quadratic;
  }
  throw ValidationError("unknown trend '" + s +
                        "' (none|pooled-quadratic|state-quadratic)");
}

std::map<std::string, LatLon> read_centroids_csv(const std::string& path) {
  auto t = csv::read_file(path);
  if (t.header != std::vector<std::string>{"unit_id", "lat", "lon"}) {
    throw ParseError(path + ": header must be unit_id,lat,lon");
  }
  std::map<std::string, LatLon> out;
  for (const auto& row : t.rows) {
    out[row[0]] = {csv::parse_double(row[1], path),
                   csv::parse_double(row[2], path)};
  }
  return out;
}

SpatialWeights build_weights(const std::string& scheme,
                             const std::vector<LatLon>& pts) {
  auto colon = scheme.find(':');
  std::string head = scheme.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : scheme.substr(colon + 1);
  if (head == "knn") {
    int k = arg.empty() ? 5 : std::stoi(arg);
    return SpatialWeights::knn(pts, k, true);
  }
  if (head == "idw") {
    if (arg.empty()) throw ValidationError("idw weights need a cutoff in km");
    return SpatialWeights::inverse_distance(pts, std::stod(arg), true);
  }
  throw ValidationError("unknown weight scheme '" + scheme +
                        "' (knn:K | idw:KM)");
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& a) {
  Eigen::MatrixXd m(a.size(), a.empty() ? 0 : a[0].size());
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < a[r].size(); ++c) {
      m(r, c) = a[r][c].get<double>();
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Subcommand options
// ---------------------------------------------------------------------------

struct InterpolateOpts {
  std::string stations, grid, date, var = "tmax", method = "knn", out;
  int k = 5;
  double power = 1.0, radius = 1.0;
};

struct ZonalOpts {
  std::string fine, coarse, out;
  int class_code = 0;
};

struct ProjectOpts {
  std::string weights, stack, out;
};

struct BinsOpts {
  std::string tmax, tmin, season = "04-09", out;
  double lo = 0.0, hi = 39.0, width = 1.0;
  int step_minutes = 15;
};

struct DegdaysOpts {
  std::string bins, out;
  double from = 8.0, to = 30.0, lo = 0.0, width = 1.0;
};

struct RegressOpts {
  std::string panel, bins, basis = "ncs", fe = "unit,year", trend = "none";
  std::string region_col = "state", se = "iid", out, weights_col;
  std::string extra_regressors;  // comma-separated panel columns
  std::string squares;           // columns to square into <col>_sq
  std::string centroids, dump_basis;
  int df = 7;
  double step_width = 5.0, lo = 0.0, width = 1.0;
  bool log_outcome = false;
};

struct ImpactOpts {
  std::string fit, bins, panel, temp_col, out;
  double delta = 2.0;
};

struct PermtestOpts {
  std::string panel, temp_col = "tmean", precip_col = "precip", stat =
      "warming:2";
  std::string fe = "unit", out;
  int b_iterations = 999;
  std::uint64_t seed = 0;
};

struct MoranOpts {
  std::string fit, centroids, wk = "knn:5", out;
  std::uint64_t seed = 0;
};

struct SemOpts {
  std::string panel, regressors, fe = "unit", wk = "knn:5", centroids, out;
};

struct SpeccurveOpts {
  std::string panel, weather, baseline = "tmean,precip,quadratic,mar_aug,pooled";
  std::string se = "cluster:state", sort = "adj_r2", out_svg, out_csv;
  double delta = 2.0;
};

struct SimulateOpts {
  std::string config, out_dir;
  std::optional<std::uint64_t> seed_override;
};

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

void run_interpolate(const InterpolateOpts& o, ManifestWriter& manifest) {
  StationTable st = read_stations_csv(o.stations);
  Grid header = read_ascii_grid(o.grid);
  InterpSpec spec;
  spec.method = parse_interp_method(o.method);
  spec.k = o.k;
  spec.power = o.power;
  spec.radius = o.radius;
  Grid g = interpolate_to_grid(st, header, o.date, parse_weather_var(o.var),
                               spec);
  write_ascii_grid(g, o.out);
  manifest.inputs = {o.stations, o.grid};
  manifest.write(o.out);
}

void run_zonal(const ZonalOpts& o, ManifestWriter& manifest) {
  Grid fine = read_ascii_grid(o.fine);
  Grid coarse = read_ascii_grid(o.coarse);
  Grid out = zonal_fractions(fine, coarse, o.class_code);
  write_ascii_grid(out, o.out);
  manifest.inputs = {o.fine, o.coarse};
  manifest.write(o.out);
}

void run_project(const ProjectOpts& o, ManifestWriter& manifest) {
  GridStack stack = read_stack(o.stack);
  ProjectionMatrix p = read_projection_csv(o.weights, stack.header.size());
  auto a = p.project(stack);
  csv::Table t;
  t.header = {"unit_id", "label", "value"};
  for (std::size_t u = 0; u < p.n_units(); ++u) {
    for (std::size_t l = 0; l < stack.n_layers(); ++l) {
      t.rows.push_back({p.unit_ids()[u], stack.labels[l],
                        csv::format_double(a[u][l])});
    }
  }
  csv::write_file(o.out, t);
  manifest.inputs = {o.weights, o.stack};
  manifest.write(o.out);
}

// Season "MM-MM" inclusive month window.
std::pair<int, int> parse_season(const std::string& s) {
  auto dash = s.find('-');
  if (dash == std::string::npos) {
    throw ValidationError("season must be MM-MM, e.g. 04-09");
  }
  int a = std::stoi(s.substr(0, dash));
  int b = std::stoi(s.substr(dash + 1));
  if (a < 1 || a > 12 || b < 1 || b > 12 || a > b) {
    throw ValidationError("season months out of order or range");
  }
  return {a, b};
}

void run_bins(const BinsOpts& o, ManifestWriter& manifest) {
  auto [m0, m1] = parse_season(o.season);
  UnitSeries tmax = read_unit_series(o.tmax);
  UnitSeries tmin = read_unit_series(o.tmin);
  BinGrid grid{o.lo, o.hi, o.width, true, true};
  grid.validate();
  SineConfig sine;
  sine.step_minutes = o.step_minutes;

  BinsTable out;
  out.n_bins = grid.n_bins();
  for (const auto& unit : tmax.units) {
    auto tn = tmin.rows.find(unit);
    if (tn == tmin.rows.end()) {
      throw ValidationError("bins: unit " + unit + " missing from tmin file");
    }
    // Group by year, filter by season months, align dates.
    std::map<int, std::vector<std::pair<std::string, double>>> mx, mn;
    for (const auto& [date, v] : tmax.rows.at(unit)) {
      int m = month_of(date);
      if (m >= m0 && m <= m1) mx[year_of(date)].emplace_back(date, v);
    }
    for (const auto& [date, v] : tn->second) {
      int m = month_of(date);
      if (m >= m0 && m <= m1) mn[year_of(date)].emplace_back(date, v);
    }
    for (auto& [year, days] : mx) {
      auto& nights = mn[year];
      std::sort(days.begin(), days.end());
      std::sort(nights.begin(), nights.end());
      if (days.size() != nights.size()) {
        throw ValidationError("bins: tmax/tmin day counts differ for " + unit +
                              " in " + std::to_string(year));
      }
      std::vector<double> hi(days.size()), lo(days.size());
      for (std::size_t d = 0; d < days.size(); ++d) {
        if (days[d].first != nights[d].first) {
          throw ValidationError("bins: tmax/tmin dates differ for " + unit +
                                " on " + days[d].first);
        }
        hi[d] = days[d].second;
        lo[d] = nights[d].second;
      }
      auto series = sine_series(lo, hi, sine);
      ExposureBins z = bin_exposure(series, grid);
      z.unit_id = unit;
      z.period = std::to_string(year);
      out.rows.push_back(std::move(z));
    }
  }
  write_bins_csv(out, o.out);
  manifest.inputs = {o.tmax, o.tmin};
  manifest.write(o.out);
}

void run_degdays(const DegdaysOpts& o, ManifestWriter& manifest) {
  BinsTable bins = read_bins_csv(o.bins);
  BinGrid grid{o.lo, o.lo + o.width * bins.n_bins, o.width, true, true};
  csv::Table t;
  t.header = {"unit_id", "year", "value"};
  for (const auto& row : bins.rows) {
    double dd = degree_days_from_bins(row, grid, o.from, o.to);
    t.rows.push_back({row.unit_id, row.period, csv::format_double(dd)});
  }
  csv::write_file(o.out, t);
  manifest.inputs = {o.bins};
  manifest.write(o.out);
}

BasisMatrix build_basis(const std::string& kind, const BinGrid& grid, int df,
                        double step_width) {
  if (kind == "ncs") return ncs_basis(grid, df);
  if (kind == "step") return step_basis(grid, step_width);
  if (kind == "chebyshev") return chebyshev_basis(grid, df - 1);
  throw ValidationError("unknown basis '" + kind + "' (step|ncs|chebyshev)");
}

void run_regress(const RegressOpts& o, ManifestWriter& manifest) {
  PanelTable panel = read_panel_csv(o.panel);
  ModelSpec spec;

  // Binned exposure regressors through a basis, when a bins file is given.
  std::optional<BasisMatrix> basis;
  if (!o.bins.empty()) {
    BinsTable bins = read_bins_csv(o.bins);
    BinGrid grid{o.lo, o.lo + o.width * bins.n_bins, o.width, true, true};
    basis = build_basis(o.basis, grid, o.df, o.step_width);
    if (!o.dump_basis.empty()) basis->write_csv(o.dump_basis);
    attach_basis_columns(panel, bins, *basis);
    for (int j = 0; j < basis->J(); ++j) {
      spec.regressors.push_back("xb" + std::to_string(j));
    }
  }
  for (const auto& c : split_commas(o.squares)) {
    const auto src = panel.col(c);
    auto& sq = panel.add_column(c + "_sq");
    for (std::size_t i = 0; i < panel.n_rows(); ++i) sq[i] = src[i] * src[i];
  }
  for (const auto& c : split_commas(o.extra_regressors)) {
    spec.regressors.push_back(c);
  }
  if (spec.regressors.empty()) {
    throw ValidationError("regress: need --bins and/or --regressors");
  }
  spec.fixed_effects = split_commas(o.fe);
  spec.trends = parse_trend(o.trend);
  spec.region_col = o.region_col;
  spec.log_outcome = o.log_outcome;
  spec.weight_col = o.weights_col;

  FitResult fit = fit_within(panel, spec);
  SEConfig se = SEConfig::parse(o.se);
  std::map<std::string, LatLon> centroids;
  if (!o.centroids.empty()) centroids = read_centroids_csv(o.centroids);
  auto sw = sandwich_se(fit, panel, se, centroids);
  fit.vgamma = sw.vgamma;
  fit.se_type = se.describe();

  json out;
  out["regressors"] = fit.regressor_names;
  out["gamma"] = vector_to_json(fit.gamma);
  out["vgamma"] = matrix_to_json(fit.vgamma);
  out["se_type"] = fit.se_type;
  out["n_obs"] = fit.n_obs;
  out["dof"] = fit.dof;
  out["r2"] = fit.r2;
  out["r2_within"] = fit.r2_within;
  out["adj_r2"] = fit.adj_r2;
  out["absorbed_dims"] = fit.absorbed_dims;
  out["warnings"] = sw.warnings;
  if (basis) {
    auto curve = recover_curve(fit.gamma.head(basis->J()),
                               fit.vgamma.topLeftCorner(basis->J(), basis->J()),
                               *basis);
    out["basis"] = {{"kind", o.basis}, {"lo", o.lo},      {"width", o.width},
                    {"df", o.df},      {"K", basis->K()}, {"J", basis->J()},
                    {"step_width", o.step_width}};
    out["curve"] = {{"midpoints", basis->eval_points},
                    {"beta", vector_to_json(curve.beta)},
                    {"se", vector_to_json(curve.se)}};
  }
  out["residuals"] = vector_to_json(fit.residuals);
  out["row_units"] = fit.row_units;
  out["row_years"] = fit.row_years;

  std::ofstream f(o.out);
  if (!f) throw IoError("cannot write " + o.out);
  f << out.dump(2) << "\n";
  manifest.inputs = {o.panel};
  if (!o.bins.empty()) manifest.inputs.push_back(o.bins);
  if (!o.centroids.empty()) manifest.inputs.push_back(o.centroids);
  manifest.write(o.out);
}

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  json j;
  f >> j;
  return j;
}

void run_impact(const ImpactOpts& o, ManifestWriter& manifest) {
  json fit_json = load_json(o.fit);
  FitResult fit;
  fit.gamma = vector_from_json(fit_json["gamma"]);
  fit.vgamma = matrix_from_json(fit_json["vgamma"]);
  fit.regressor_names =
      fit_json["regressors"].get<std::vector<std::string>>();

  Impact impact;
  manifest.inputs = {o.fit};
  if (!o.bins.empty()) {
    BinsTable bins = read_bins_csv(o.bins);
    const auto& b = fit_json["basis"];
    BinGrid grid{b["lo"].get<double>(),
                 b["lo"].get<double>() + b["width"].get<double>() * bins.n_bins,
                 b["width"].get<double>(), true, true};
    BasisMatrix basis =
        build_basis(b["kind"].get<std::string>(), grid, b["df"].get<int>(),
                    b["step_width"].get<double>());
    Eigen::MatrixXd z(bins.rows.size(), bins.n_bins);
    for (std::size_t i = 0; i < bins.rows.size(); ++i) {
      for (int k = 0; k < bins.n_bins; ++k) z(i, k) = bins.rows[i].z[k];
    }
    impact = warming_impact_binned(fit, z, basis, grid.width, o.delta);
    manifest.inputs.push_back(o.bins);
  } else if (!o.panel.empty() && !o.temp_col.empty()) {
    PanelTable panel = read_panel_csv(o.panel);
    impact = warming_impact_polynomial(fit, panel, o.temp_col, o.delta);
    manifest.inputs.push_back(o.panel);
  } else {
    throw ValidationError("impact: need either --bins (binned fit) or "
                          "--panel with --temp-col (polynomial fit)");
  }

  json out;
  out["delta"] = o.delta;
  out["impact"] = impact.estimate;
  out["se"] = impact.se;
  std::ofstream f(o.out);
  if (!f) throw IoError("cannot write " + o.out);
  f << out.dump(2) << "\n";
  manifest.write(o.out);
}

void run_permtest(const PermtestOpts& o, ManifestWriter& manifest) {
  PanelTable panel = read_panel_csv(o.panel);
  auto built = build_spec_quadratic(panel, o.temp_col, o.precip_col);
  ModelSpec spec = built.spec;
  spec.fixed_effects = split_commas(o.fe);

  std::string stat_kind = o.stat.substr(0, o.stat.find(':'));
  std::string stat_arg =
      o.stat.find(':') == std::string::npos ? "" : o.stat.substr(o.stat.find(':') + 1);

  std::function<double(const PanelTable&)> statistic;
  if (stat_kind == "warming") {
    double delta = stat_arg.empty() ? 2.0 : std::stod(stat_arg);
    std::string temp_col = o.temp_col;
    statistic = [spec, temp_col, delta](const PanelTable& p) {
      auto local = build_spec_quadratic(p, temp_col, spec.regressors[2]);
      ModelSpec s = local.spec;
      s.fixed_effects = spec.fixed_effects;
      auto fit = fit_within(local.panel, s);
      return warming_impact_polynomial(fit, local.panel, temp_col, delta)
          .estimate;
    };
  } else if (stat_kind == "coef") {
    if (stat_arg.empty()) throw ValidationError("stat coef needs a column");
    std::string name = stat_arg;
    statistic = [spec, name](const PanelTable& p) {
      auto local = build_spec_quadratic(p, spec.regressors[0],
                                        spec.regressors[2]);
      ModelSpec s = local.spec;
      s.fixed_effects = spec.fixed_effects;
      auto fit = fit_within(local.panel, s);
      for (std::size_t j = 0; j < fit.regressor_names.size(); ++j) {
        if (fit.regressor_names[j] == name) return fit.gamma[j];
      }
      throw ValidationError("stat column '" + name + "' not in fit");
    };
  } else {
    throw ValidationError("unknown stat '" + o.stat +
                          "' (warming:DELTA | coef:NAME)");
  }

  auto res = permutation_test(panel, {o.temp_col, o.precip_col}, statistic,
                              o.b_iterations, o.seed);

  json out;
  out["stat"] = res.stat;
  out["p"] = res.p;
  out["B"] = o.b_iterations;
  out["seed"] = o.seed;
  out["n_skipped"] = res.n_skipped;
  out["null_draws"] = res.null_draws;
  std::ofstream f(o.out);
  if (!f) throw IoError("cannot write " + o.out);
  f << out.dump(2) << "\n";
  manifest.inputs = {o.panel};
  manifest.seed = o.seed;
  manifest.write(o.out);
}

void run_moran(const MoranOpts& o, ManifestWriter& manifest) {
  json fit_json = load_json(o.fit);
  auto residuals = vector_from_json(fit_json["residuals"]);
  auto row_units = fit_json["row_units"].get<std::vector<std::string>>();
  auto centroids = read_centroids_csv(o.centroids);

  // Average residuals per unit (cross-sectional view of the panel).
  std::map<std::string, std::pair<double, int>> acc;
  for (std::size_t i = 0; i < row_units.size(); ++i) {
    auto& a = acc[row_units[i]];
    a.first += residuals[i];
    a.second += 1;
  }
  std::vector<std::string> units;
  for (const auto& [unit, a] : acc) units.push_back(unit);
  Eigen::VectorXd e(units.size());
  std::vector<LatLon> pts;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& a = acc[units[i]];
    e[i] = a.first / a.second;
    auto it = centroids.find(units[i]);
    if (it == centroids.end()) {
      throw ValidationError("moran: no centroid for unit " + units[i]);
    }
    pts.push_back(it->second);
  }
  SpatialWeights w = build_weights(o.wk, pts);
  auto res = morans_i(e, w, o.seed);

  json out;
  out["I"] = res.i;
  out["p"] = res.p;
  out["n_units"] = units.size();
  out["weights"] = o.wk;
  std::ofstream f(o.out);
  if (!f) throw IoError("cannot write " + o.out);
  f << out.dump(2) << "\n";
  manifest.inputs = {o.fit, o.centroids};
  manifest.seed = o.seed;
  manifest.write(o.out);
}

void run_sem(const SemOpts& o, ManifestWriter& manifest) {
  PanelTable panel = read_panel_csv(o.panel);
  auto centroids = read_centroids_csv(o.centroids);
  auto units = panel.distinct_units();
  std::vector<LatLon> pts;
  for (const auto& u : units) {
    auto it = centroids.find(u);
    if (it == centroids.end()) {
      throw ValidationError("sem: no centroid for unit " + u);
    }
    pts.push_back(it->second);
  }
  SpatialWeights w = build_weights(o.wk, pts);

  ModelSpec spec;
  spec.regressors = split_commas(o.regressors);
  if (spec.regressors.empty()) {
    throw ValidationError("sem: --regressors is required");
  }
  spec.fixed_effects = split_commas(o.fe);
  auto res = sem_ml(panel, spec, w, units);

  json out;
  out["lambda"] = res.lambda;
  out["sigma2"] = res.sigma2;
  out["beta"] = vector_to_json(res.beta);
  out["vgamma"] = matrix_to_json(res.vgamma);
  out["regressors"] = res.regressor_names;
  out["log_likelihood"] = res.log_likelihood;
  std::ofstream f(o.out);
  if (!f) throw IoError("cannot write " + o.out);
  f << out.dump(2) << "\n";
  manifest.inputs = {o.panel, o.centroids};
  manifest.write(o.out);
}

void run_speccurve(const SpeccurveOpts& o, ManifestWriter& manifest) {
  PanelTable panel = read_panel_csv(o.panel);
  PanelTable weather = read_panel_csv(o.weather);
  SpecGrid grid;
  grid.baseline = parse_spec_descriptor(o.baseline);
  SEConfig se = SEConfig::parse(o.se);
  auto results = run_grid(panel, weather, grid, se, o.delta);

  SpecSort sort;
  if (o.sort == "adj_r2") sort = SpecSort::adj_r2;
  else if (o.sort == "estimate") sort = SpecSort::estimate;
  else if (o.sort == "input_order") sort = SpecSort::input_order;
  else throw ValidationError("unknown sort '" + o.sort + "'");

  render_chart(results, sort, o.out_svg, o.out_csv);
  manifest.inputs = {o.panel, o.weather};
  manifest.write(o.out_csv);
}

DGPConfig dgp_from_json(const json& j) {
  DGPConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("seed", c.seed);
  get("n_units", c.n_units);
  get("n_years", c.n_years);
  get("first_year", c.first_year);
  get("grid_nrows", c.grid_nrows);
  get("grid_ncols", c.grid_ncols);
  get("n_stations", c.n_stations);
  get("season_start_doy", c.season_start_doy);
  get("season_days", c.season_days);
  get("tmean_lo", c.tmean_lo);
  get("tmean_hi", c.tmean_hi);
  get("season_amplitude", c.season_amplitude);
  get("diurnal_range", c.diurnal_range);
  get("diurnal_sd", c.diurnal_sd);
  get("day_sd", c.day_sd);
  get("year_sd", c.year_sd);
  get("beta_precip", c.beta_precip);
  get("beta_precip_sq", c.beta_precip_sq);
  get("sigma_unit_fe", c.sigma_unit_fe);
  get("trend_per_year", c.trend_per_year);
  get("sigma_eps", c.sigma_eps);
  get("sar_lambda", c.sar_lambda);
  get("cluster_rho", c.cluster_rho);
  get("n_states", c.n_states);
  if (j.contains("bins")) {
    c.bins.lo = j["bins"].value("lo", c.bins.lo);
    c.bins.hi = j["bins"].value("hi", c.bins.hi);
    c.bins.width = j["bins"].value("width", c.bins.width);
  }
  if (j.contains("g")) {
    c.g.xs = j["g"]["xs"].get<std::vector<double>>();
    c.g.ys = j["g"]["ys"].get<std::vector<double>>();
  }
  if (j.contains("error_model")) {
    std::string m = j["error_model"].get<std::string>();
    if (m == "iid") c.error_model = ErrorModel::iid;
    else if (m == "sar") c.error_model = ErrorModel::sar;
    else if (m == "clustered") c.error_model = ErrorModel::clustered;
    else throw ValidationError("dgp: unknown error_model '" + m + "'");
  }
  return c;
}

void run_simulate(const SimulateOpts& o, ManifestWriter& manifest) {
  DGPConfig cfg = dgp_from_json(load_json(o.config));
  if (o.seed_override) cfg.seed = *o.seed_override;
  SynthData data = generate(cfg);

  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir);
  auto at = [&](const std::string& name) { return o.out_dir + "/" + name; };

  write_stations_csv(data.stations, at("stations.csv"));
  write_admin_weights_csv(data.admin_units, at("units.csv"));
  write_projection_csv(data.projection, at("weights.csv"));
  write_stack(data.stack, at("stack_manifest.csv"), "tmax_layer");
  write_bins_csv(data.bins, at("bins.csv"));
  write_panel_csv(data.panel, at("panel.csv"));
  write_panel_csv(data.weather, at("weather.csv"));

  Grid header = data.stack.header;
  header.values.assign(header.size(), 0.0);
  write_ascii_grid(header, at("grid_header.asc"));

  {
    csv::Table cents;
    cents.header = {"unit_id", "lat", "lon"};
    for (const auto& u : data.admin_units.units) {
      if (!u.centroid) continue;
      cents.rows.push_back({u.unit_id, csv::format_double(u.centroid->lat),
                            csv::format_double(u.centroid->lon)});
    }
    csv::write_file(at("centroids.csv"), cents);
  }

  for (const char* which : {"tmax", "tmin"}) {
    csv::Table t;
    t.header = {"unit_id", "label", "value"};
    for (const auto& d : data.daily) {
      const auto& vals = std::string(which) == "tmax" ? d.tmax : d.tmin;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        t.rows.push_back({d.unit_id, d.dates[i],
                          csv::format_double(vals[i])});
      }
    }
    csv::write_file(at(std::string("A_") + which + ".csv"), t);
  }

  json truth;
  truth["g_at_midpoints"] = data.truth.g_at_midpoints;
  truth["beta_precip"] = data.truth.beta_precip;
  truth["beta_precip_sq"] = data.truth.beta_precip_sq;
  truth["trend_per_year"] = data.truth.trend_per_year;
  truth["unit_fe"] = data.truth.unit_fe;
  truth["sar_lambda"] = data.truth.sar_lambda;
  truth["seed"] = cfg.seed;
  std::ofstream f(at("truth.json"));
  f << truth.dump(2) << "\n";

  manifest.inputs = {o.config};
  manifest.seed = cfg.seed;
  manifest.write(at("run"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agropanel: station-to-panel weather aggregation and "
               "econometric estimation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap (default: machine parallelism; env "
                 "AGROPANEL_THREADS)");

  InterpolateOpts io;
  auto* interp = app.add_subcommand("interpolate",
                                    "Interpolate station data onto a grid");
  interp->add_option("--stations", io.stations)->required();
  interp->add_option("--grid", io.grid, "Grid header .asc")->required();
  interp->add_option("--date", io.date, "ISO date")->required();
  interp->add_option("--var", io.var, "tmax|tmin|ppt");
  interp->add_option("--method", io.method, "nearest|knn|radius");
  interp->add_option("--k", io.k);
  interp->add_option("--power", io.power);
  interp->add_option("--radius", io.radius, "degrees of arc");
  interp->add_option("--out", io.out)->required();

  ZonalOpts zo;
  auto* zonal = app.add_subcommand("zonal",
                                   "Class fractions of a fine categorical "
                                   "raster per coarse cell");
  zonal->add_option("--fine", zo.fine)->required();
  zonal->add_option("--coarse", zo.coarse)->required();
  zonal->add_option("--class", zo.class_code)->required();
  zonal->add_option("--out", zo.out)->required();

  ProjectOpts po;
  auto* project = app.add_subcommand("project",
                                     "Sparse aggregation of a raster stack "
                                     "onto units");
  project->add_option("--weights", po.weights)->required();
  project->add_option("--stack", po.stack, "Stack manifest CSV")->required();
  project->add_option("--out", po.out)->required();

  BinsOpts bo;
  auto* bins = app.add_subcommand("bins",
                                  "Temperature exposure bins from daily unit "
                                  "series");
  bins->add_option("--tmax", bo.tmax)->required();
  bins->add_option("--tmin", bo.tmin)->required();
  bins->add_option("--lo", bo.lo);
  bins->add_option("--hi", bo.hi);
  bins->add_option("--width", bo.width);
  bins->add_option("--season", bo.season, "MM-MM month window");
  bins->add_option("--step-minutes", bo.step_minutes);
  bins->add_option("--out", bo.out)->required();

  DegdaysOpts dd;
  auto* degdays = app.add_subcommand("degdays",
                                     "Degree days between thresholds from "
                                     "exposure bins");
  degdays->add_option("--bins", dd.bins)->required();
  degdays->add_option("--from", dd.from)->required();
  degdays->add_option("--to", dd.to)->required();
  degdays->add_option("--lo", dd.lo, "lower edge of bin 0");
  degdays->add_option("--width", dd.width);
  degdays->add_option("--out", dd.out)->required();

  RegressOpts ro;
  auto* regress = app.add_subcommand("regress",
                                     "Panel fixed-effects fit of exposure "
                                     "bins through a basis");
  regress->add_option("--panel", ro.panel)->required();
  regress->add_option("--bins", ro.bins, "exposure bins (optional)");
  regress->add_option("--basis", ro.basis, "step|ncs|chebyshev");
  regress->add_option("--df", ro.df);
  regress->add_option("--step-width", ro.step_width);
  regress->add_option("--lo", ro.lo, "lower edge of bin 0");
  regress->add_option("--width", ro.width);
  regress->add_option("--fe", ro.fe, "comma list: unit,year,COL,COL*year");
  regress->add_option("--trend", ro.trend,
                      "none|pooled-quadratic|state-quadratic");
  regress->add_option("--region-col", ro.region_col);
  regress->add_option("--se", ro.se,
                      "iid|hc0|hc1|cluster:COL|twoway:A,B|conley:KM[,LAGS]");
  regress->add_option("--centroids", ro.centroids, "unit_id,lat,lon CSV");
  regress->add_option("--regressors", ro.extra_regressors,
                      "extra panel columns");
  regress->add_option("--squares", ro.squares,
                      "columns to square into <col>_sq before fitting");
  regress->add_option("--weights-col", ro.weights_col);
  regress->add_flag("--log-outcome", ro.log_outcome);
  regress->add_option("--dump-basis", ro.dump_basis,
                      "write the basis matrix as k,j,value CSV");
  regress->add_option("--out", ro.out)->required();

  ImpactOpts imo;
  auto* impact = app.add_subcommand("impact",
                                    "Warming impact from a stored fit");
  impact->add_option("--fit", imo.fit)->required();
  impact->add_option("--delta", imo.delta);
  impact->add_option("--bins", imo.bins, "binned fits");
  impact->add_option("--panel", imo.panel, "polynomial fits");
  impact->add_option("--temp-col", imo.temp_col);
  impact->add_option("--out", imo.out)->required();

  PermtestOpts pt;
  auto* permtest = app.add_subcommand("permtest",
                                      "Placebo permutation test by "
                                      "reshuffling unit weather");
  permtest->add_option("--panel", pt.panel)->required();
  permtest->add_option("--temp-col", pt.temp_col);
  permtest->add_option("--precip-col", pt.precip_col);
  permtest->add_option("--stat", pt.stat, "warming:DELTA|coef:NAME");
  permtest->add_option("--fe", pt.fe);
  permtest->add_option("--B", pt.b_iterations);
  permtest->add_option("--seed", pt.seed)->required();
  permtest->add_option("--out", pt.out)->required();

  MoranOpts mo;
  auto* moran = app.add_subcommand("moran",
                                   "Moran's I on per-unit mean residuals");
  moran->add_option("--fit", mo.fit)->required();
  moran->add_option("--centroids", mo.centroids)->required();
  moran->add_option("--wk", mo.wk, "knn:K|idw:KM");
  moran->add_option("--seed", mo.seed)->required();
  moran->add_option("--out", mo.out)->required();

  SemOpts so;
  auto* sem = app.add_subcommand("sem",
                                 "Spatial error model by maximum likelihood "
                                 "(balanced panel)");
  sem->add_option("--panel", so.panel)->required();
  sem->add_option("--regressors", so.regressors)->required();
  sem->add_option("--fe", so.fe);
  sem->add_option("--wk", so.wk, "knn:K|idw:KM");
  sem->add_option("--centroids", so.centroids)->required();
  sem->add_option("--out", so.out)->required();

  SpeccurveOpts sc;
  auto* speccurve = app.add_subcommand("speccurve",
                                       "72-way specification chart");
  speccurve->add_option("--panel", sc.panel)->required();
  speccurve->add_option("--weather", sc.weather)->required();
  speccurve->add_option("--baseline", sc.baseline);
  speccurve->add_option("--se", sc.se);
  speccurve->add_option("--delta", sc.delta);
  speccurve->add_option("--sort", sc.sort, "adj_r2|estimate|input_order");
  speccurve->add_option("--out-svg", sc.out_svg)->required();
  speccurve->add_option("--out-csv", sc.out_csv)->required();

  SimulateOpts si;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate",
                                      "Deterministic synthetic pipeline "
                                      "inputs");
  simulate->add_option("--config", si.config, "DGP json")->required();
  auto* seed_opt = simulate->add_option("--seed", sim_seed,
                                        "overrides the config seed");
  simulate->add_option("--out-dir", si.out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads <= 0) {
    if (const char* env = std::getenv("AGROPANEL_THREADS")) {
      threads = std::atoi(env);
    }
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  ManifestWriter manifest;
  manifest.command_line = join_argv(argc, argv);

  try {
    if (*interp) run_interpolate(io, manifest);
    if (*zonal) run_zonal(zo, manifest);
    if (*project) run_project(po, manifest);
    if (*bins) run_bins(bo, manifest);
    if (*degdays) run_degdays(dd, manifest);
    if (*regress) run_regress(ro, manifest);
    if (*impact) run_impact(imo, manifest);
    if (*permtest) run_permtest(pt, manifest);
    if (*moran) run_moran(mo, manifest);
    if (*sem) run_sem(so, manifest);
    if (*speccurve) run_speccurve(sc, manifest);
    if (*simulate) {
      if (seed_opt->count() > 0) si.seed_override = sim_seed;
      run_simulate(si, manifest);
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
