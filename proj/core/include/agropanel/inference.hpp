// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agropanel/geo.hpp"
#include "agropanel/regress.hpp"
#include "agropanel/tables.hpp"

namespace agropanel {

enum class SEKind { iid, hc0, hc1, cluster, twoway_cluster, conley };
enum class SpatialKernel { bartlett, uniform };

struct SEConfig {
  SEKind kind = SEKind::iid;
  std::vector<std::string> cluster_cols;  // "unit", "year" or column names
  double cutoff_km = 804.67;              // 500 miles
  SpatialKernel kernel = SpatialKernel::bartlett;
  int time_lags = 0;  // within-unit Bartlett serial terms

  /// Parses "iid", "hc0", "hc1", "cluster:COL", "twoway:COL1,COL2",
  /// "conley:KM" or "conley:KM,LAGS".
  static SEConfig parse(const std::string& text);
  std::string describe() const;
};

struct SandwichResult {
  Eigen::MatrixXd vgamma;
  std::vector<std::string> warnings;
};

/// Sandwich covariance of the fit's coefficients under the requested
/// estimator. Conley needs per-unit centroids. Every returned matrix is
/// symmetrized; negative eigenvalues (possible for the two-way composition)
/// are floored at zero with a warning.
SandwichResult sandwich_se(const FitResult& fit, const PanelTable& panel,
                           const SEConfig& config,
                           const std::map<std::string, LatLon>& centroids = {});

/// Sparse spatial weight matrix over n units with zero diagonal.
class SpatialWeights {
 public:
  enum class Scheme { knn, inverse_distance_cutoff, custom };

  /// Symmetric k-nearest (union of neighbor sets), then row-normalized.
  static SpatialWeights knn(const std::vector<LatLon>& pts, int k = 5,
                            bool normalize = true);
  /// 1/d weights within a km cutoff, then row-normalized.
  static SpatialWeights inverse_distance(const std::vector<LatLon>& pts,
                                         double cutoff_km,
                                         bool normalize = true);
  /// Rook-contiguity lattice, row-normalized; used by simulations.
  static SpatialWeights rook_lattice(int nrows, int ncols,
                                     bool normalize = true);
  /// From a dense symmetric matrix (test oracles).
  static SpatialWeights from_dense(const Eigen::MatrixXd& w,
                                   bool normalize = false);

  int n() const { return static_cast<int>(rows_.size()); }
  Scheme scheme() const { return scheme_; }
  bool row_normalized() const { return normalized_; }
  double s0() const;  // sum of all entries
  const std::vector<std::vector<std::pair<int, double>>>& rows() const {
    return rows_;
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd dense() const;

  /// Real spectrum of W. Row-normalized symmetric structure is handled via
  /// the degree-scaled similarity transform.
  std::vector<double> eigenvalues() const;

  void validate() const;

 private:
  void finish_build_();
  void row_normalize_();

  std::vector<std::vector<std::pair<int, double>>> rows_;
  std::vector<double> degree_;  // pre-normalization row sums
  Scheme scheme_ = Scheme::custom;
  bool normalized_ = false;
};

struct MoranResult {
  double i = 0;
  double p = 0;
};

/// Moran's I with a two-sided permutation p-value (999 reshuffles).
MoranResult morans_i(const Eigen::VectorXd& residuals,
                     const SpatialWeights& w, std::uint64_t seed = 12345,
                     int permutations = 999);

struct SemResult {
  Eigen::VectorXd beta;
  double lambda = 0;
  double sigma2 = 0;
  Eigen::MatrixXd vgamma;
  double log_likelihood = 0;
  std::vector<std::string> regressor_names;
};

/// Spatial error model u = lambda W u + eps on a balanced panel, estimated
/// by concentrated maximum likelihood with the eigenvalue form of
/// log|I - lambda W| and a golden-section search (tolerance 1e-8).
/// `unit_order` maps W's row indices to panel unit ids. Guard: n <= 5000.
SemResult sem_ml(const PanelTable& panel, const ModelSpec& spec,
                 const SpatialWeights& w,
                 const std::vector<std::string>& unit_order,
                 std::optional<double> fixed_lambda = std::nullopt);

struct PermutationResult {
  double stat = 0;
  double p = 1;
  std::vector<double> null_draws;
  int n_skipped = 0;
};

/// Placebo permutation test: reshuffles entire unit-level weather series
/// across units (within-unit time structure preserved), re-computes the
/// statistic B times and reports p = (1 + #{|stat*| >= |stat|}) / (B + 1).
/// Deterministic for a fixed seed via per-iteration RNG streams. Iterations
/// where the statistic is undefined are skipped; more than 10% skipped is an
/// error.
PermutationResult permutation_test(
    const PanelTable& panel, const std::vector<std::string>& weather_cols,
    const std::function<double(const PanelTable&)>& statistic,
    int b_iterations, std::uint64_t seed);

}  // namespace agropanel
