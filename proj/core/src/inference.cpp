// SPDX-License-Identifier: Apache-2.0
#include "agropanel/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "agropanel/errors.hpp"
#include "agropanel/rng.hpp"

namespace agropanel {

SEConfig SEConfig::parse(const std::string& text) {
  SEConfig c;
  auto colon = text.find(':');
  std::string head = text.substr(0, colon);
  std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "iid") {
    c.kind = SEKind::iid;
  } else if (head == "hc0") {
    c.kind = SEKind::hc0;
  } else if (head == "hc1") {
    c.kind = SEKind::hc1;
  } else if (head == "cluster") {
    c.kind = SEKind::cluster;
    if (args.empty()) throw ValidationError("se: cluster needs a column");
    c.cluster_cols = {args};
  } else if (head == "twoway") {
    c.kind = SEKind::twoway_cluster;
    auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw ValidationError("se: twoway needs two columns");
    }
    c.cluster_cols = {args.substr(0, comma), args.substr(comma + 1)};
  } else if (head == "conley") {
    c.kind = SEKind::conley;
    if (!args.empty()) {
      auto comma = args.find(',');
      c.cutoff_km = std::stod(args.substr(0, comma));
      if (comma != std::string::npos) {
        c.time_lags = std::stoi(args.substr(comma + 1));
      }
    }
    if (!(c.cutoff_km > 0)) throw ValidationError("se: cutoff must be > 0");
  } else {
    throw ValidationError("se: unknown estimator '" + text + "'");
  }
  return c;
}

std::string SEConfig::describe() const {
  switch (kind) {
    case SEKind::iid: return "iid";
    case SEKind::hc0: return "hc0";
    case SEKind::hc1: return "hc1";
    case SEKind::cluster: return "cluster:" + cluster_cols[0];
    case SEKind::twoway_cluster:
      return "twoway:" + cluster_cols[0] + "," + cluster_cols[1];
    case SEKind::conley:
      return "conley:" + std::to_string(cutoff_km) + "," +
             std::to_string(time_lags);
  }
  return "?";
}

namespace {

std::vector<int> cluster_ids(const PanelTable& panel, const std::string& col,
                             int* n_levels) {
  std::vector<int> out(panel.n_rows());
  int count = 0;
  if (col == "unit") {
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
      auto [it, fresh] = ids.try_emplace(panel.unit_ids[i], count);
      if (fresh) ++count;
      out[i] = it->second;
    }
  } else if (col == "year") {
    std::map<int, int> ids;
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
      auto [it, fresh] = ids.try_emplace(panel.years[i], count);
      if (fresh) ++count;
      out[i] = it->second;
    }
  } else {
    const auto& c = panel.col(col);
    std::map<long, int> ids;
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
      auto [it, fresh] = ids.try_emplace(std::lround(c[i] * 4096.0), count);
      if (fresh) ++count;
      out[i] = it->second;
    }
  }
  *n_levels = count;
  return out;
}

Eigen::MatrixXd cluster_meat(const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& e,
                             const std::vector<int>& ids, int n_levels) {
  const int j = static_cast<int>(x.cols());
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_levels, j);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    scores.row(ids[i]) += e[i] * x.row(i);
  }
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(j, j);
  for (int g = 0; g < n_levels; ++g) {
    s += scores.row(g).transpose() * scores.row(g);
  }
  return s;
}

}  // namespace

SandwichResult sandwich_se(const FitResult& fit, const PanelTable& panel,
                           const SEConfig& config,
                           const std::map<std::string, LatLon>& centroids) {
  const Eigen::MatrixXd& x = fit.xtil;
  const Eigen::VectorXd& e = fit.residuals;
  const auto n = x.rows();
  const int j = static_cast<int>(x.cols());
  if (e.size() != n) throw ShapeError("sandwich: residual length mismatch");

  SandwichResult out;
  Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::MatrixXd bread =
      xtx.ldlt().solve(Eigen::MatrixXd::Identity(j, j));

  Eigen::MatrixXd meat(j, j);
  switch (config.kind) {
    case SEKind::iid: {
      double sigma2 = e.squaredNorm() / fit.dof;
      out.vgamma = sigma2 * bread;
      return out;
    }
    case SEKind::hc0:
    case SEKind::hc1: {
      meat.setZero();
      for (Eigen::Index i = 0; i < n; ++i) {
        meat += (e[i] * e[i]) * (x.row(i).transpose() * x.row(i));
      }
      if (config.kind == SEKind::hc1) {
        meat *= static_cast<double>(n) / (static_cast<double>(n) - j);
      }
      break;
    }
    case SEKind::cluster: {
      if (config.cluster_cols.size() != 1) {
        throw ValidationError("sandwich: cluster needs one column");
      }
      int levels = 0;
      auto ids = cluster_ids(panel, config.cluster_cols[0], &levels);
      if (levels < 2) {
        out.warnings.push_back("cluster column '" + config.cluster_cols[0] +
                               "' has a single level");
      }
      meat = cluster_meat(x, e, ids, levels);
      break;
    }
    case SEKind::twoway_cluster: {
      if (config.cluster_cols.size() != 2) {
        throw ValidationError("sandwich: twoway needs two columns");
      }
      int la = 0, lb = 0;
      auto a = cluster_ids(panel, config.cluster_cols[0], &la);
      auto b = cluster_ids(panel, config.cluster_cols[1], &lb);
      if (la < 2 || lb < 2) {
        out.warnings.push_back("twoway cluster has a degenerate dimension");
      }
      // Intersection clusters.
      std::map<std::pair<int, int>, int> inter;
      std::vector<int> ab(x.rows());
      int lab = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        auto [it, fresh] = inter.try_emplace({a[i], b[i]}, lab);
        if (fresh) ++lab;
        ab[i] = it->second;
      }
      meat = cluster_meat(x, e, a, la) + cluster_meat(x, e, b, lb) -
             cluster_meat(x, e, ab, lab);
      break;
    }
    case SEKind::conley: {
      if (!(config.cutoff_km > 0)) {
        throw ValidationError("sandwich: conley cutoff must be > 0");
      }
      // Per-row coordinates from unit centroids.
      std::vector<LatLon> pos(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        auto it = centroids.find(fit.row_units[i]);
        if (it == centroids.end()) {
          throw ValidationError("sandwich: no centroid for unit " +
                                fit.row_units[i]);
        }
        pos[i] = it->second;
      }
      // Same-period spatial cross products.
      std::map<int, std::vector<Eigen::Index>> by_year;
      for (Eigen::Index i = 0; i < n; ++i) {
        by_year[fit.row_years[i]].push_back(i);
      }
      meat.setZero();
      for (const auto& [yr, rows] : by_year) {
        (void)yr;
        for (std::size_t ai = 0; ai < rows.size(); ++ai) {
          Eigen::Index i = rows[ai];
          meat += (e[i] * e[i]) * (x.row(i).transpose() * x.row(i));
          for (std::size_t bi = ai + 1; bi < rows.size(); ++bi) {
            Eigen::Index k = rows[bi];
            double d = haversine_km(pos[i], pos[k]);
            if (d >= config.cutoff_km) continue;
            double kw = config.kernel == SpatialKernel::bartlett
                            ? 1.0 - d / config.cutoff_km
                            : 1.0;
            Eigen::MatrixXd cross =
                (kw * e[i] * e[k]) * (x.row(i).transpose() * x.row(k));
            meat += cross + cross.transpose();
          }
        }
      }
      // Within-unit serial terms, Bartlett in the lag.
      if (config.time_lags > 0) {
        std::map<std::string, std::vector<Eigen::Index>> by_unit;
        for (Eigen::Index i = 0; i < n; ++i) {
          by_unit[fit.row_units[i]].push_back(i);
        }
        for (auto& [unit, rows] : by_unit) {
          (void)unit;
          std::sort(rows.begin(), rows.end(),
                    [&](Eigen::Index p, Eigen::Index q) {
                      return fit.row_years[p] < fit.row_years[q];
                    });
          for (std::size_t ai = 0; ai < rows.size(); ++ai) {
            for (std::size_t bi = ai + 1; bi < rows.size(); ++bi) {
              int lag = fit.row_years[rows[bi]] - fit.row_years[rows[ai]];
              if (lag > config.time_lags) break;
              double kw = 1.0 - static_cast<double>(lag) /
                                    (config.time_lags + 1.0);
              Eigen::Index i = rows[ai], k = rows[bi];
              Eigen::MatrixXd cross =
                  (kw * e[i] * e[k]) * (x.row(i).transpose() * x.row(k));
              meat += cross + cross.transpose();
            }
          }
        }
      }
      break;
    }
  }

  Eigen::MatrixXd v = bread * meat * bread;
  v = 0.5 * (v + v.transpose()).eval();

  // A two-way composition can leave the estimate indefinite; floor the
  // spectrum at zero.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())) {
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    v = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
    v = 0.5 * (v + v.transpose()).eval();
    out.warnings.push_back("covariance spectrum floored at zero");
  }
  out.vgamma = std::move(v);
  return out;
}

SpatialWeights SpatialWeights::knn(const std::vector<LatLon>& pts, int k,
                                   bool normalize) {
  const int n = static_cast<int>(pts.size());
  if (k < 1 || k >= n) throw ValidationError("knn weights: need 1 <= k < n");
  SpatialWeights w;
  w.rows_.resize(n);
  std::vector<std::set<int>> nbrs(n);
  std::vector<std::pair<double, int>> d(n);
  for (int i = 0; i < n; ++i) {
    for (int m = 0; m < n; ++m) {
      d[m] = {haversine_km(pts[i], pts[m]), m};
    }
    d[i].first = std::numeric_limits<double>::infinity();
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int m = 0; m < k; ++m) {
      nbrs[i].insert(d[m].second);
      nbrs[d[m].second].insert(i);  // symmetric by union
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int m : nbrs[i]) w.rows_[i].emplace_back(m, 1.0);
  }
  w.scheme_ = Scheme::knn;
  w.finish_build_();
  if (normalize) w.row_normalize_();
  return w;
}

SpatialWeights SpatialWeights::inverse_distance(const std::vector<LatLon>& pts,
                                                double cutoff_km,
                                                bool normalize) {
  if (!(cutoff_km > 0)) {
    throw ValidationError("distance weights: cutoff must be > 0");
  }
  const int n = static_cast<int>(pts.size());
  SpatialWeights w;
  w.rows_.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int m = i + 1; m < n; ++m) {
      double d = haversine_km(pts[i], pts[m]);
      if (d < 1e-9 || d > cutoff_km) continue;
      w.rows_[i].emplace_back(m, 1.0 / d);
      w.rows_[m].emplace_back(i, 1.0 / d);
    }
  }
  w.scheme_ = Scheme::inverse_distance_cutoff;
  w.finish_build_();
  if (normalize) w.row_normalize_();
  return w;
}

SpatialWeights SpatialWeights::rook_lattice(int nrows, int ncols,
                                            bool normalize) {
  SpatialWeights w;
  w.rows_.resize(static_cast<std::size_t>(nrows) * ncols);
  auto id = [&](int r, int c) { return r * ncols + c; };
  for (int r = 0; r < nrows; ++r) {
    for (int c = 0; c < ncols; ++c) {
      auto& row = w.rows_[id(r, c)];
      if (r > 0) row.emplace_back(id(r - 1, c), 1.0);
      if (r + 1 < nrows) row.emplace_back(id(r + 1, c), 1.0);
      if (c > 0) row.emplace_back(id(r, c - 1), 1.0);
      if (c + 1 < ncols) row.emplace_back(id(r, c + 1), 1.0);
    }
  }
  w.finish_build_();
  if (normalize) w.row_normalize_();
  return w;
}

SpatialWeights SpatialWeights::from_dense(const Eigen::MatrixXd& m,
                                          bool normalize) {
  if (m.rows() != m.cols()) {
    throw ShapeError("spatial weights: matrix must be square");
  }
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    throw ValidationError("spatial weights: matrix must be symmetric before "
                          "normalization");
  }
  SpatialWeights w;
  w.rows_.resize(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (i == c || m(i, c) == 0) continue;
      w.rows_[i].emplace_back(static_cast<int>(c), m(i, c));
    }
  }
  w.finish_build_();
  if (normalize) w.row_normalize_();
  return w;
}

void SpatialWeights::finish_build_() {
  degree_.assign(rows_.size(), 0.0);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    std::sort(rows_[i].begin(), rows_[i].end());
    for (auto& [c, v] : rows_[i]) degree_[i] += v;
  }
}

void SpatialWeights::row_normalize_() {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (degree_[i] <= 0) continue;
    for (auto& [c, v] : rows_[i]) v /= degree_[i];
  }
  normalized_ = true;
}

double SpatialWeights::s0() const {
  double s = 0;
  for (const auto& row : rows_) {
    for (const auto& [c, v] : row) s += v;
  }
  return s;
}

Eigen::VectorXd SpatialWeights::multiply(const Eigen::VectorXd& v) const {
  if (v.size() != n()) throw ShapeError("spatial weights: length mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n());
  for (int i = 0; i < n(); ++i) {
    double acc = 0;
    for (const auto& [c, w] : rows_[i]) acc += w * v[c];
    out[i] = acc;
  }
  return out;
}

Eigen::MatrixXd SpatialWeights::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n(), n());
  for (int i = 0; i < n(); ++i) {
    for (const auto& [c, w] : rows_[i]) m(i, c) = w;
  }
  return m;
}

std::vector<double> SpatialWeights::eigenvalues() const {
  // Row-normalized W = D^-1 S with S symmetric shares its spectrum with the
  // symmetric D^-1/2 S D^-1/2.
  Eigen::MatrixXd sym(n(), n());
  sym.setZero();
  for (int i = 0; i < n(); ++i) {
    double di = normalized_ ? (degree_[i] > 0 ? degree_[i] : 1.0) : 1.0;
    for (const auto& [c, w] : rows_[i]) {
      double dc = normalized_ ? (degree_[c] > 0 ? degree_[c] : 1.0) : 1.0;
      double s = normalized_ ? w * di : w;  // recover S entry
      sym(i, c) = s / std::sqrt(di * dc);
    }
  }
  double asym = (sym - sym.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9) {
    throw ValidationError("spatial weights: spectrum requires a symmetric "
                          "base matrix");
  }
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  std::vector<double> out(es.eigenvalues().data(),
                          es.eigenvalues().data() + n());
  return out;
}

void SpatialWeights::validate() const {
  for (int i = 0; i < n(); ++i) {
    double sum = 0;
    for (const auto& [c, v] : rows_[i]) {
      if (c == i) throw ValidationError("spatial weights: nonzero diagonal");
      if (c < 0 || c >= n()) {
        throw ValidationError("spatial weights: column out of range");
      }
      sum += v;
    }
    if (normalized_ && !rows_[i].empty() && std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("spatial weights: normalized row does not sum "
                            "to 1");
    }
  }
}

MoranResult morans_i(const Eigen::VectorXd& residuals, const SpatialWeights& w,
                     std::uint64_t seed, int permutations) {
  if (residuals.size() != w.n()) {
    throw ShapeError("morans_i: residual length does not match W");
  }
  double spread = residuals.maxCoeff() - residuals.minCoeff();
  if (spread <= 0) {
    throw ValidationError("morans_i: residuals are constant");
  }
  const int n = w.n();
  Eigen::VectorXd e = residuals.array() - residuals.mean();
  double denom = e.squaredNorm();
  double s0 = w.s0();
  auto stat = [&](const Eigen::VectorXd& v) {
    return (n / s0) * v.dot(w.multiply(v)) / denom;
  };
  MoranResult out;
  out.i = stat(e);

  Rng rng(seed);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int at_least = 0;
  Eigen::VectorXd shuffled(n);
  for (int b = 0; b < permutations; ++b) {
    Rng stream = rng.derive(static_cast<std::uint64_t>(b) + 1);
    stream.shuffle(perm);
    for (int i = 0; i < n; ++i) shuffled[i] = e[perm[i]];
    if (std::abs(stat(shuffled)) >= std::abs(out.i)) ++at_least;
  }
  out.p = (1.0 + at_least) / (permutations + 1.0);
  return out;
}

SemResult sem_ml(const PanelTable& panel, const ModelSpec& spec,
                 const SpatialWeights& w,
                 const std::vector<std::string>& unit_order,
                 std::optional<double> fixed_lambda) {
  if (w.n() > 5000) {
    throw ValidationError("sem_ml: dense eigendecomposition guard (n <= 5000)");
  }
  if (static_cast<int>(unit_order.size()) != w.n()) {
    throw ShapeError("sem_ml: unit order does not match W");
  }
  panel.validate();

  // Balance check: every unit in every period.
  std::map<std::string, int> unit_index;
  for (int i = 0; i < w.n(); ++i) unit_index[unit_order[i]] = i;
  std::set<int> years(panel.years.begin(), panel.years.end());
  std::vector<int> year_list(years.begin(), years.end());
  std::map<int, int> year_index;
  for (std::size_t t = 0; t < year_list.size(); ++t) {
    year_index[year_list[t]] = static_cast<int>(t);
  }
  const int nu = w.n();
  const int nt = static_cast<int>(year_list.size());
  std::vector<char> present(static_cast<std::size_t>(nu) * nt, 0);
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    auto it = unit_index.find(panel.unit_ids[i]);
    if (it == unit_index.end()) {
      throw ValidationError("sem_ml: panel unit " + panel.unit_ids[i] +
                            " missing from W order");
    }
    present[static_cast<std::size_t>(it->second) * nt +
            year_index[panel.years[i]]] = 1;
  }
  for (int u = 0; u < nu; ++u) {
    for (int t = 0; t < nt; ++t) {
      if (!present[static_cast<std::size_t>(u) * nt + t]) {
        throw ValidationError("sem_ml: unbalanced panel, missing (" +
                              unit_order[u] + "," +
                              std::to_string(year_list[t]) + ")");
      }
    }
  }

  // Within transformation via the shared fitter, then re-order rows into
  // (period, unit) blocks.
  FitResult ols = fit_within(panel, spec);
  const int j = static_cast<int>(ols.gamma.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(nu) * nt, j);
  Eigen::VectorXd y(static_cast<Eigen::Index>(nu) * nt);
  // Demeaned outcome = residual + x gamma.
  Eigen::VectorXd ytil = ols.residuals + ols.xtil * ols.gamma;
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    int u = unit_index[panel.unit_ids[i]];
    int t = year_index[panel.years[i]];
    Eigen::Index row = static_cast<Eigen::Index>(t) * nu + u;
    x.row(row) = ols.xtil.row(static_cast<Eigen::Index>(i));
    y[row] = ytil[static_cast<Eigen::Index>(i)];
  }

  auto eig = w.eigenvalues();
  double w_min = *std::min_element(eig.begin(), eig.end());
  double w_max = *std::max_element(eig.begin(), eig.end());
  double lo = w_min < 0 ? 1.0 / w_min : -1e6;
  double hi = w_max > 0 ? 1.0 / w_max : 1e6;

  const double total = static_cast<double>(nu) * nt;
  struct Eval {
    double ll;
    Eigen::VectorXd beta;
    double sigma2;
    Eigen::MatrixXd xtx;
  };
  auto evaluate = [&](double lambda) -> Eval {
    Eigen::MatrixXd xs(x.rows(), j);
    Eigen::VectorXd ys(y.size());
    for (int t = 0; t < nt; ++t) {
      auto xb = x.middleRows(static_cast<Eigen::Index>(t) * nu, nu);
      auto yb = y.segment(static_cast<Eigen::Index>(t) * nu, nu);
      for (int col = 0; col < j; ++col) {
        xs.col(col).segment(static_cast<Eigen::Index>(t) * nu, nu) =
            xb.col(col) - lambda * w.multiply(xb.col(col));
      }
      ys.segment(static_cast<Eigen::Index>(t) * nu, nu) =
          yb - lambda * w.multiply(yb);
    }
    Eval ev;
    ev.xtx = xs.transpose() * xs;
    ev.beta = ev.xtx.ldlt().solve(xs.transpose() * ys);
    double ssr = (ys - xs * ev.beta).squaredNorm();
    ev.sigma2 = ssr / total;
    // T periods share one W: log|I_T kron (I - lambda W)| = T log|I - lambda W|
    double logdet = 0;
    for (double om : eig) logdet += std::log(1.0 - lambda * om);
    ev.ll = -0.5 * total * std::log(ev.sigma2) +
            static_cast<double>(nt) * logdet;
    return ev;
  };

  double lambda_hat = 0;
  if (fixed_lambda) {
    lambda_hat = *fixed_lambda;
  } else {
    // Golden-section search on the concentrated likelihood.
    const double gr = 0.6180339887498949;
    double a = lo + 1e-9, b = hi - 1e-9;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = evaluate(c).ll, fd = evaluate(d).ll;
    while (b - a > 1e-8) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - gr * (b - a);
        fc = evaluate(c).ll;
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + gr * (b - a);
        fd = evaluate(d).ll;
      }
    }
    lambda_hat = 0.5 * (a + b);
    if (lambda_hat - lo < 1e-6 * (hi - lo) || hi - lambda_hat < 1e-6 * (hi - lo)) {
      throw ValidationError("sem_ml: lambda estimate at the admissible "
                            "boundary");
    }
  }

  Eval ev = evaluate(lambda_hat);
  SemResult out;
  out.beta = ev.beta;
  out.lambda = lambda_hat;
  out.sigma2 = ev.sigma2;
  out.vgamma =
      ev.sigma2 * ev.xtx.ldlt().solve(Eigen::MatrixXd::Identity(j, j));
  out.log_likelihood = ev.ll;
  out.regressor_names = ols.regressor_names;
  return out;
}

PermutationResult permutation_test(
    const PanelTable& panel, const std::vector<std::string>& weather_cols,
    const std::function<double(const PanelTable&)>& statistic,
    int b_iterations, std::uint64_t seed) {
  if (b_iterations < 1) {
    throw ValidationError("permutation_test: B must be >= 1");
  }
  panel.validate();
  for (const auto& c : weather_cols) panel.col(c);  // existence check

  PermutationResult out;
  out.stat = statistic(panel);

  auto units = panel.distinct_units();
  const std::size_t nu = units.size();
  std::map<std::string, int> unit_pos;
  for (std::size_t u = 0; u < nu; ++u) unit_pos[units[u]] = static_cast<int>(u);

  // Donor lookup: (unit position, year) -> row.
  std::map<std::pair<int, int>, std::size_t> row_of;
  for (std::size_t i = 0; i < panel.n_rows(); ++i) {
    row_of[{unit_pos[panel.unit_ids[i]], panel.years[i]}] = i;
  }
  std::vector<int> col_idx;
  for (const auto& c : weather_cols) col_idx.push_back(panel.column(c));

  Rng rng(seed);
  out.null_draws.assign(b_iterations,
                        std::numeric_limits<double>::quiet_NaN());
  std::vector<char> skipped(b_iterations, 0);

#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < b_iterations; ++b) {
    Rng stream = rng.derive(static_cast<std::uint64_t>(b) + 1);
    std::vector<int> donor(nu);
    std::iota(donor.begin(), donor.end(), 0);
    stream.shuffle(donor);

    PanelTable permuted = panel;
    std::vector<std::size_t> keep;
    keep.reserve(panel.n_rows());
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
      int d = donor[unit_pos[panel.unit_ids[i]]];
      auto it = row_of.find({d, panel.years[i]});
      if (it == row_of.end()) continue;  // donor lacks this year
      for (int c : col_idx) permuted.data[c][i] = panel.data[c][it->second];
      keep.push_back(i);
    }
    if (keep.size() != panel.n_rows()) {
      PanelTable trimmed;
      trimmed.columns = permuted.columns;
      trimmed.data.resize(permuted.data.size());
      for (auto i : keep) {
        trimmed.unit_ids.push_back(permuted.unit_ids[i]);
        trimmed.years.push_back(permuted.years[i]);
        trimmed.y.push_back(permuted.y[i]);
        for (std::size_t c = 0; c < permuted.data.size(); ++c) {
          trimmed.data[c].push_back(permuted.data[c][i]);
        }
      }
      permuted = std::move(trimmed);
    }
    try {
      out.null_draws[b] = statistic(permuted);
    } catch (const std::exception&) {
      skipped[b] = 1;
    }
  }

  int n_valid = 0, at_least = 0;
  for (int b = 0; b < b_iterations; ++b) {
    if (skipped[b]) {
      ++out.n_skipped;
      continue;
    }
    ++n_valid;
    if (std::abs(out.null_draws[b]) >= std::abs(out.stat)) ++at_least;
  }
  if (out.n_skipped * 10 > b_iterations) {
    throw ValidationError("permutation_test: statistic undefined in more "
                          "than 10% of iterations");
  }
  out.p = (1.0 + at_least) / (n_valid + 1.0);
  return out;
}

}  // namespace agropanel
