// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "agropanel/inference.hpp"
#include "agropanel/regress.hpp"
#include "agropanel/tables.hpp"

namespace agropanel {

/// One cell of the specification grid.
struct SpecDescriptor {
  std::string temp_var = "tmean";  // tmax | tmean | tmin
  bool include_precip = true;
  bool cubic = false;            // else quadratic
  std::string season = "mar_aug";  // mar_aug | apr_sep | annual
  bool by_state_trend = false;   // else pooled

  /// "tmean,precip,quadratic,mar_aug,pooled" form.
  std::string key() const;
};

SpecDescriptor parse_spec_descriptor(const std::string& text);

/// Cartesian grid of modeling choices: 3 temperature variables x precip
/// in/out x quadratic/cubic x 3 seasons x pooled/by-state trend = 72.
struct SpecGrid {
  std::vector<std::string> temp_vars = {"tmax", "tmean", "tmin"};
  std::vector<bool> precip_options = {true, false};
  std::vector<bool> cubic_options = {false, true};
  std::vector<std::string> seasons = {"mar_aug", "apr_sep", "annual"};
  std::vector<bool> trend_options = {false, true};
  SpecDescriptor baseline;

  std::vector<SpecDescriptor> combinations() const;
};

struct SpecResult {
  SpecDescriptor desc;
  bool ok = false;
  std::string error;
  double impact = 0;
  double impact_se = 0;
  double adj_r2 = 0;
  std::size_t n_obs = 0;
  int rank = 0;  // 1-based, nondecreasing adjusted R2
  bool is_baseline = false;
};

enum class SpecSort { adj_r2, estimate, input_order };

/// Estimates every grid combination on the panel (outcome and state column)
/// joined with per-season weather columns (<var>_<season>, ppt_<season>),
/// computing the impact of a uniform warming of `delta` degrees under the
/// given standard errors. Per-spec failures are recorded without aborting;
/// a failing baseline is a hard error.
std::vector<SpecResult> run_grid(const PanelTable& panel,
                                 const PanelTable& weather,
                                 const SpecGrid& grid, const SEConfig& se,
                                 double delta = 2.0);

/// Writes the sorted chart (SVG, byte-deterministic) and the full results
/// table (CSV).
void render_chart(const std::vector<SpecResult>& results, SpecSort sort,
                  const std::string& out_svg, const std::string& out_csv);

}  // namespace agropanel
