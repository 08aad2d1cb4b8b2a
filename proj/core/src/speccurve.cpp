// SPDX-License-Identifier: Apache-2.0
#include "agropanel/speccurve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"

namespace agropanel {

std::string SpecDescriptor::key() const {
  return temp_var + "," + (include_precip ? "precip" : "noprecip") + "," +
         (cubic ? "cubic" : "quadratic") + "," + season + "," +
         (by_state_trend ? "by_state" : "pooled");
}

SpecDescriptor parse_spec_descriptor(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 5) {
    throw ValidationError("spec descriptor needs 5 comma-separated fields: "
                          "tempvar,precip,form,season,trend");
  }
  SpecDescriptor d;
  if (parts[0] != "tmax" && parts[0] != "tmean" && parts[0] != "tmin") {
    throw ValidationError("spec descriptor: bad temperature variable '" +
                          parts[0] + "'");
  }
  d.temp_var = parts[0];
  if (parts[1] == "precip") d.include_precip = true;
  else if (parts[1] == "noprecip") d.include_precip = false;
  else throw ValidationError("spec descriptor: expected precip|noprecip");
  if (parts[2] == "cubic") d.cubic = true;
  else if (parts[2] == "quadratic") d.cubic = false;
  else throw ValidationError("spec descriptor: expected quadratic|cubic");
  if (parts[3] != "mar_aug" && parts[3] != "apr_sep" && parts[3] != "annual") {
    throw ValidationError("spec descriptor: bad season '" + parts[3] + "'");
  }
  d.season = parts[3];
  if (parts[4] == "by_state") d.by_state_trend = true;
  else if (parts[4] == "pooled") d.by_state_trend = false;
  else throw ValidationError("spec descriptor: expected pooled|by_state");
  return d;
}

std::vector<SpecDescriptor> SpecGrid::combinations() const {
  std::vector<SpecDescriptor> out;
  for (const auto& tv : temp_vars) {
    for (bool precip : precip_options) {
      for (bool cubic : cubic_options) {
        for (const auto& season : seasons) {
          for (bool trend : trend_options) {
            out.push_back({tv, precip, cubic, season, trend});
          }
        }
      }
    }
  }
  return out;
}

namespace {

// Join per-season weather columns onto the panel rows.
PanelTable join_weather(const PanelTable& panel, const PanelTable& weather) {
  std::map<std::pair<std::string, int>, std::size_t> row_of;
  for (std::size_t i = 0; i < weather.n_rows(); ++i) {
    row_of[{weather.unit_ids[i], weather.years[i]}] = i;
  }
  PanelTable out = panel;
  for (std::size_t c = 0; c < weather.columns.size(); ++c) {
    auto& col = out.add_column(weather.columns[c]);
    for (std::size_t i = 0; i < out.n_rows(); ++i) {
      auto it = row_of.find({out.unit_ids[i], out.years[i]});
      if (it == row_of.end()) {
        throw ValidationError("speccurve: no weather row for (" +
                              out.unit_ids[i] + "," +
                              std::to_string(out.years[i]) + ")");
      }
      col[i] = weather.data[c][it->second];
    }
  }
  return out;
}

SpecResult run_one(const PanelTable& merged, const SpecDescriptor& d,
                   const SEConfig& se, double delta) {
  SpecResult res;
  res.desc = d;
  std::string tcol = d.temp_var + "_" + d.season;
  std::string pcol = "ppt_" + d.season;

  PanelTable work = merged;
  const auto t = work.col(tcol);
  {
    auto& c = work.add_column(tcol + "_sq");
    for (std::size_t i = 0; i < work.n_rows(); ++i) c[i] = t[i] * t[i];
  }
  std::vector<std::string> regs = {tcol, tcol + "_sq"};
  if (d.cubic) {
    auto& c = work.add_column(tcol + "_cu");
    for (std::size_t i = 0; i < work.n_rows(); ++i) c[i] = t[i] * t[i] * t[i];
    regs.push_back(tcol + "_cu");
  }
  if (d.include_precip) {
    const auto p = work.col(pcol);
    auto& c2 = work.add_column(pcol + "_sq");
    for (std::size_t i = 0; i < work.n_rows(); ++i) c2[i] = p[i] * p[i];
    regs.push_back(pcol);
    regs.push_back(pcol + "_sq");
    if (d.cubic) {
      auto& c3 = work.add_column(pcol + "_cu");
      for (std::size_t i = 0; i < work.n_rows(); ++i) {
        c3[i] = p[i] * p[i] * p[i];
      }
      regs.push_back(pcol + "_cu");
    }
  }

  ModelSpec spec;
  spec.regressors = regs;
  spec.fixed_effects = {"unit"};
  spec.trends = d.by_state_trend ? TrendSpec::by_region_quadratic
                                 : TrendSpec::pooled_quadratic;
  spec.region_col = "state";

  FitResult fit = fit_within(work, spec);
  fit.vgamma = sandwich_se(fit, work, se).vgamma;
  Impact impact = warming_impact_polynomial(fit, work, tcol, delta);

  res.ok = true;
  res.impact = impact.estimate;
  res.impact_se = impact.se;
  res.adj_r2 = fit.adj_r2;
  res.n_obs = fit.n_obs;
  return res;
}

}  // namespace

std::vector<SpecResult> run_grid(const PanelTable& panel,
                                 const PanelTable& weather,
                                 const SpecGrid& grid, const SEConfig& se,
                                 double delta) {
  PanelTable merged = join_weather(panel, weather);
  auto combos = grid.combinations();
  std::vector<SpecResult> results;
  results.reserve(combos.size());

  std::string baseline_key = grid.baseline.key();
  bool baseline_seen = false;
  for (const auto& d : combos) {
    SpecResult res;
    try {
      res = run_one(merged, d, se, delta);
    } catch (const std::exception& e) {
      res.desc = d;
      res.ok = false;
      res.error = e.what();
    }
    res.is_baseline = d.key() == baseline_key;
    if (res.is_baseline) {
      baseline_seen = true;
      if (!res.ok) {
        throw ValidationError("speccurve: baseline specification failed: " +
                              res.error);
      }
    }
    results.push_back(std::move(res));
  }
  if (!baseline_seen) {
    throw ValidationError("speccurve: baseline is not a member of the grid");
  }

  // Rank nondecreasing in adjusted R2, failures first, ties by descriptor.
  std::vector<int> order(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ra = results[a];
    const auto& rb = results[b];
    double va = ra.ok ? ra.adj_r2 : -std::numeric_limits<double>::infinity();
    double vb = rb.ok ? rb.adj_r2 : -std::numeric_limits<double>::infinity();
    if (va != vb) return va < vb;
    return ra.desc.key() < rb.desc.key();
  });
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    results[order[pos]].rank = static_cast<int>(pos) + 1;
  }
  return results;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct MatrixRow {
  std::string label;
  std::function<bool(const SpecDescriptor&)> on;
};

}  // namespace

void render_chart(const std::vector<SpecResult>& results, SpecSort sort,
                  const std::string& out_svg, const std::string& out_csv) {
  if (results.empty()) {
    throw ValidationError("render_chart: no results");
  }

  std::vector<int> order(results.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  switch (sort) {
    case SpecSort::adj_r2:
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return results[a].rank < results[b].rank;
      });
      break;
    case SpecSort::estimate:
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (results[a].impact != results[b].impact) {
          return results[a].impact < results[b].impact;
        }
        return results[a].desc.key() < results[b].desc.key();
      });
      break;
    case SpecSort::input_order:
      break;
  }

  // CSV
  csv::Table t;
  t.header = {"rank",   "temp_var", "precip", "form",     "season",
              "trend",  "baseline", "impact", "impact_se", "adj_r2",
              "n_obs",  "ok",       "error"};
  for (int idx : order) {
    const auto& r = results[idx];
    t.rows.push_back({std::to_string(r.rank),
                      r.desc.temp_var,
                      r.desc.include_precip ? "precip" : "noprecip",
                      r.desc.cubic ? "cubic" : "quadratic",
                      r.desc.season,
                      r.desc.by_state_trend ? "by_state" : "pooled",
                      r.is_baseline ? "1" : "0",
                      csv::format_double(r.impact),
                      csv::format_double(r.impact_se),
                      csv::format_double(r.adj_r2),
                      std::to_string(r.n_obs),
                      r.ok ? "1" : "0",
                      r.error});
  }
  csv::write_file(out_csv, t);

  // SVG: estimate panel on top, specification matrix below.
  const std::vector<MatrixRow> rows = {
      {"tmax", [](const SpecDescriptor& d) { return d.temp_var == "tmax"; }},
      {"tmean", [](const SpecDescriptor& d) { return d.temp_var == "tmean"; }},
      {"tmin", [](const SpecDescriptor& d) { return d.temp_var == "tmin"; }},
      {"precip in",
       [](const SpecDescriptor& d) { return d.include_precip; }},
      {"precip out",
       [](const SpecDescriptor& d) { return !d.include_precip; }},
      {"quadratic", [](const SpecDescriptor& d) { return !d.cubic; }},
      {"cubic", [](const SpecDescriptor& d) { return d.cubic; }},
      {"mar-aug",
       [](const SpecDescriptor& d) { return d.season == "mar_aug"; }},
      {"apr-sep",
       [](const SpecDescriptor& d) { return d.season == "apr_sep"; }},
      {"annual", [](const SpecDescriptor& d) { return d.season == "annual"; }},
      {"pooled trend",
       [](const SpecDescriptor& d) { return !d.by_state_trend; }},
      {"state trend",
       [](const SpecDescriptor& d) { return d.by_state_trend; }},
  };

  const double left = 120, top = 20;
  const double panel_h = 220, row_h = 16;
  const double step = std::max(6.0, 720.0 / static_cast<double>(results.size()));
  const double width = left + step * static_cast<double>(results.size()) + 40;
  const double matrix_top = top + panel_h + 30;
  const double height = matrix_top + row_h * rows.size() + 30;

  double lo = 0, hi = 0;
  bool any = false;
  for (const auto& r : results) {
    if (!r.ok) continue;
    lo = any ? std::min(lo, r.impact - 1.96 * r.impact_se)
             : r.impact - 1.96 * r.impact_se;
    hi = any ? std::max(hi, r.impact + 1.96 * r.impact_se)
             : r.impact + 1.96 * r.impact_se;
    any = true;
  }
  if (!any) {
    lo = -1;
    hi = 1;
  }
  if (hi - lo < 1e-12) {
    hi += 0.5;
    lo -= 0.5;
  }
  auto yscale = [&](double v) {
    return top + panel_h - (v - lo) / (hi - lo) * panel_h;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) +
         "\" height=\"" + fmt(height) + "\" font-family=\"monospace\" "
         "font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Zero line and axis labels.
  if (lo < 0 && hi > 0) {
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(yscale(0)) +
           "\" x2=\"" + fmt(left + step * results.size()) + "\" y2=\"" +
           fmt(yscale(0)) + "\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>\n";
  }
  svg += "<text x=\"10\" y=\"" + fmt(top + 10) + "\">" + fmt(hi) + "</text>\n";
  svg += "<text x=\"10\" y=\"" + fmt(top + panel_h) + "\">" + fmt(lo) +
         "</text>\n";

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& r = results[order[pos]];
    double x = left + step * (static_cast<double>(pos) + 0.5);
    const char* color = r.is_baseline ? "#cc0000" : "#1f4e8c";
    if (r.ok) {
      svg += "<line x1=\"" + fmt(x) + "\" y1=\"" +
             fmt(yscale(r.impact - 1.96 * r.impact_se)) + "\" x2=\"" + fmt(x) +
             "\" y2=\"" + fmt(yscale(r.impact + 1.96 * r.impact_se)) +
             "\" stroke=\"" + color + "\" stroke-width=\"1\"/>\n";
      svg += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(yscale(r.impact)) +
             "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    } else {
      svg += "<text x=\"" + fmt(x - 3) + "\" y=\"" + fmt(top + panel_h / 2) +
             "\" fill=\"#cc0000\">x</text>\n";
    }
  }

  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    double y = matrix_top + row_h * (static_cast<double>(ri) + 0.5);
    svg += "<text x=\"10\" y=\"" + fmt(y + 4) + "\">" + rows[ri].label +
           "</text>\n";
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto& r = results[order[pos]];
      double x = left + step * (static_cast<double>(pos) + 0.5);
      bool on = rows[ri].on(r.desc);
      const char* fill = on ? (r.is_baseline ? "#cc0000" : "#333333")
                            : "none";
      svg += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) +
             "\" r=\"2.5\" fill=\"" + std::string(fill) +
             "\" stroke=\"#bbbbbb\" stroke-width=\"0.5\"/>\n";
    }
  }
  svg += "</svg>\n";

  std::ofstream out(out_svg, std::ios::binary);
  if (!out) throw IoError("cannot write " + out_svg);
  out << svg;
  if (!out) throw IoError("write failed for " + out_svg);
}

}  // namespace agropanel
