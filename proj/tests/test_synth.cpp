// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "agropanel/errors.hpp"
#include "agropanel/regress.hpp"
#include "agropanel/rng.hpp"
#include "agropanel/synth.hpp"

using namespace agropanel;

TEST_CASE("generate: identical seeds give identical output") {
  DGPConfig cfg;
  cfg.seed = 77;
  cfg.n_units = 9;
  cfg.n_years = 3;
  cfg.season_days = 30;
  auto a = generate(cfg);
  auto b = generate(cfg);
  CHECK(a.panel.y == b.panel.y);
  CHECK(a.panel.data == b.panel.data);
  for (std::size_t i = 0; i < a.bins.rows.size(); ++i) {
    CHECK(a.bins.rows[i].z == b.bins.rows[i].z);
  }
  CHECK(a.weather.data == b.weather.data);
  CHECK(a.stack.layers == b.stack.layers);

  DGPConfig other = cfg;
  other.seed = 78;
  auto c = generate(other);
  CHECK(a.panel.y != c.panel.y);
}

TEST_CASE("generate: exposure rows satisfy mass conservation") {
  DGPConfig cfg;
  cfg.seed = 5;
  cfg.n_units = 6;
  cfg.n_years = 2;
  cfg.season_days = 61;
  auto data = generate(cfg);
  for (const auto& row : data.bins.rows) {
    CHECK(std::abs(row.total() - 61.0) <= 1e-9);
    row.validate();
  }
}

TEST_CASE("generate: zero-noise config identifies g at every bin") {
  DGPConfig cfg;
  cfg.seed = 9;
  cfg.n_units = 60;
  cfg.n_years = 4;
  cfg.season_days = 92;
  cfg.sigma_eps = 0.0;
  cfg.sigma_unit_fe = 0.0;
  cfg.trend_per_year = 0.0;
  cfg.beta_precip = 0.002;
  cfg.beta_precip_sq = 0.0;
  // Narrow the binned range so every bin sees exposure variation.
  cfg.bins = {8.0, 32.0, 1.0, true, true};
  cfg.tmean_lo = 14.0;
  cfg.tmean_hi = 24.0;
  auto data = generate(cfg);

  // Per-bin regression: y on all bins plus precip, no fixed effects.
  PanelTable p = data.panel;
  const int k_count = data.bins.n_bins;
  std::vector<std::string> names;
  for (int k = 0; k < k_count; ++k) {
    names.push_back("z" + std::to_string(k));
    auto& col = p.add_column(names.back());
    for (std::size_t i = 0; i < p.n_rows(); ++i) {
      col[i] = data.bins.rows[i].z[k];
    }
  }
  names.push_back("precip");
  ModelSpec spec;
  spec.regressors = names;
  auto fit = fit_within(p, spec);
  for (int k = 0; k < k_count; ++k) {
    CHECK(fit.gamma[k] ==
          doctest::Approx(data.truth.g_at_midpoints[k]).epsilon(1e-6));
  }
  CHECK(fit.gamma[k_count] == doctest::Approx(0.002).epsilon(1e-6));
}

TEST_CASE("generate: panel aligns with bins rows and unit order") {
  DGPConfig cfg;
  cfg.seed = 13;
  cfg.n_units = 8;
  cfg.n_years = 3;
  cfg.season_days = 20;
  auto data = generate(cfg);
  REQUIRE(data.panel.n_rows() == data.bins.rows.size());
  for (std::size_t i = 0; i < data.panel.n_rows(); ++i) {
    CHECK(data.panel.unit_ids[i] == data.bins.rows[i].unit_id);
    CHECK(std::to_string(data.panel.years[i]) == data.bins.rows[i].period);
  }
  CHECK(data.projection.n_units() == 8);
  data.projection.validate();
  CHECK(data.w.n() == 8);
  data.w.validate();
}

TEST_CASE("generate: clustered errors correlate within states only") {
  DGPConfig cfg;
  cfg.seed = 505;
  cfg.n_units = 32;
  cfg.n_years = 40;
  cfg.season_days = 15;
  cfg.g = {{0.0, 39.0}, {0.0, 0.0}};
  cfg.beta_precip = 0.0;
  cfg.sigma_unit_fe = 0.0;
  cfg.sigma_eps = 1.0;
  cfg.error_model = ErrorModel::clustered;
  cfg.cluster_rho = 0.8;
  cfg.n_states = 4;
  auto data = generate(cfg);

  // With no signal and no fixed effects, y is the error itself. Average
  // pairwise correlation within states should dwarf the cross-state one.
  const auto& state = data.panel.col("state");
  std::map<std::pair<std::string, std::string>, std::vector<double>> series;
  std::map<std::string, int> state_of;
  for (std::size_t i = 0; i < data.panel.n_rows(); ++i) {
    series[{data.panel.unit_ids[i], ""}].push_back(data.panel.y[i]);
    state_of[data.panel.unit_ids[i]] = static_cast<int>(state[i]);
  }
  std::vector<std::pair<int, std::vector<double>>> units;
  for (auto& [key, v] : series) units.emplace_back(state_of[key.first], v);

  double within = 0, cross = 0;
  int n_within = 0, n_cross = 0;
  for (std::size_t a = 0; a < units.size(); ++a) {
    for (std::size_t b = a + 1; b < units.size(); ++b) {
      double prod = 0;
      for (int t = 0; t < cfg.n_years; ++t) {
        prod += units[a].second[t] * units[b].second[t];
      }
      prod /= cfg.n_years;
      if (units[a].first == units[b].first) {
        within += prod;
        ++n_within;
      } else {
        cross += prod;
        ++n_cross;
      }
    }
  }
  CHECK(within / n_within > 0.4);              // rho = 0.8, sigma = 1
  CHECK(std::abs(cross / n_cross) < 0.2);      // independent across states
}

TEST_CASE("generate: sar errors are recovered by the spatial error model") {
  DGPConfig cfg;
  cfg.seed = 404;
  cfg.n_units = 100;  // 10 x 10 rook lattice
  cfg.n_years = 8;
  cfg.season_days = 20;
  cfg.g = {{0.0, 39.0}, {0.0, 0.0}};  // no temperature signal
  cfg.beta_precip = 0.01;
  cfg.sigma_unit_fe = 0.5;
  cfg.sigma_eps = 1.0;
  cfg.error_model = ErrorModel::sar;
  cfg.sar_lambda = 0.5;
  auto data = generate(cfg);

  ModelSpec spec;
  spec.regressors = {"precip"};
  spec.fixed_effects = {"unit"};
  auto res = sem_ml(data.panel, spec, data.w, data.unit_order);
  CHECK(res.lambda > 0.3);
  CHECK(res.lambda < 0.7);
  CHECK(res.beta[0] == doctest::Approx(0.01).epsilon(0.5));
}

TEST_CASE("oracle ols: slope, intercept-only, and QR cross-check") {
  SUBCASE("one regressor through the origin: slope = sum xy / sum x^2") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 2.1, 3.9, 6.2, 7.8;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 4; ++i) {
      sxy += x(i, 0) * y[i];
      sxx += x(i, 0) * x(i, 0);
    }
    auto beta = oracle_dense_ols(x, y);
    CHECK(beta[0] == doctest::Approx(sxy / sxx).epsilon(1e-12));
  }
  SUBCASE("intercept-only recovers the mean") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(5, 1);
    Eigen::VectorXd y(5);
    y << 1, 2, 3, 4, 10;
    auto beta = oracle_dense_ols(x, y);
    CHECK(beta[0] == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("random 30x4 agrees with a QR solve") {
    Rng rng(500);
    Eigen::MatrixXd x(30, 4);
    Eigen::VectorXd y(30);
    for (int i = 0; i < 30; ++i) {
      for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
      y[i] = rng.normal();
    }
    auto beta = oracle_dense_ols(x, y);
    Eigen::VectorXd qr = x.householderQr().solve(y);
    CHECK((beta - qr).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("singular design rejected") {
    Eigen::MatrixXd x(3, 2);
    x << 1, 2, 2, 4, 3, 6;
    Eigen::VectorXd y(3);
    y << 1, 2, 3;
    CHECK_THROWS_AS(oracle_dense_ols(x, y), ValidationError);
  }
}

TEST_CASE("doy_to_iso maps season boundaries") {
  CHECK(doy_to_iso(2001, 1) == "2001-01-01");
  CHECK(doy_to_iso(2001, 91) == "2001-04-01");
  CHECK(doy_to_iso(2001, 273) == "2001-09-30");
  CHECK(doy_to_iso(2001, 365) == "2001-12-31");
}
