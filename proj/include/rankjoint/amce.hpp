#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rankjoint/dataset.hpp"
#include "rankjoint/expansion.hpp"

namespace rankjoint {

enum class VcovType { CR0, CR1, CR2 };
enum class OutcomeKind { PairChoice, NormalizedRank };
enum class ClusterBy { Subject, Task, None };

std::string_view to_string(VcovType v);
std::string_view to_string(OutcomeKind k);
std::string_view to_string(ClusterBy c);
VcovType parse_vcov(std::string_view text);
OutcomeKind parse_outcome(std::string_view text);
ClusterBy parse_cluster(std::string_view text);

inline constexpr const char* kInterceptLabel = "(Intercept)";

/// Names one design column. The intercept is {"(Intercept)", ""}.
struct CoefficientLabel {
  std::string attribute;
  std::string level;

  bool is_intercept() const { return attribute == kInterceptLabel && level.empty(); }
  std::string str() const { return is_intercept() ? attribute : attribute + ":" + level; }
  friend auto operator<=>(const CoefficientLabel&, const CoefficientLabel&) = default;
};

/// Intercept plus treatment-coded dummies, one per non-baseline level, in
/// schema order.
std::vector<CoefficientLabel> design_labels(const AttributeSchema& schema);

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  /// Optional observation weights; empty means unit weights.
  Eigen::VectorXd weights;
  /// Dense cluster index per row, in [0, n_clusters).
  std::vector<std::uint32_t> cluster;
  std::size_t n_clusters = 0;
  std::vector<CoefficientLabel> labels;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
};

/// Fills the dummy columns of `X` for `n` rows whose per-attribute level
/// indices are produced by `levels_of(i)`. Column 0 is the intercept.
template <class LevelsOf>
Eigen::MatrixXd encode_levels(const AttributeSchema& schema, std::size_t n,
                              LevelsOf&& levels_of) {
  const auto p = 1 + schema.num_effects();
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(p));
  std::vector<std::size_t> offset(schema.size());
  std::size_t col = 1;
  for (std::size_t a = 0; a < schema.size(); ++a) {
    offset[a] = col;
    col += schema[a].levels.size() - 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    X(row, 0) = 1.0;
    const std::span<const int> codes = levels_of(i);
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const auto code = static_cast<std::size_t>(codes[a]);
      const auto base = schema[a].baseline;
      if (code == base) continue;
      const auto k = code < base ? code : code - 1;
      X(row, static_cast<Eigen::Index>(offset[a] + k)) = 1.0;
    }
  }
  return X;
}

using LevelMap = std::map<std::string, std::string>;

/// Dummy-codes rows given as attribute name -> level string. Throws DataError
/// on missing attributes or unknown levels. y is zero and every row is its own
/// cluster.
DesignMatrix encode_design(std::span<const LevelMap> rows, const AttributeSchema& schema);

/// Focal-profile design of a PairDataset with y = pairwise outcome.
DesignMatrix design_from_pairs(const PairDataset& pairs, ClusterBy cluster);

/// One row per profile with y = normalized rank, weighted by K - 1 so that
/// tasks of different sizes get the same weight as in the pairwise expansion.
DesignMatrix design_from_normalized_rank(const ConjointDataset& d, ClusterBy cluster);

/// Per-focal-profile mean of y across a PairDataset's directed rows, weighted
/// by the number of rows averaged.
DesignMatrix design_from_pair_means(const PairDataset& pairs, ClusterBy cluster);

/// One row per profile with y = choice indicator (forced-choice data).
DesignMatrix design_from_choices(const ConjointDataset& d, ClusterBy cluster);

struct OlsFit {
  Eigen::VectorXd beta;
  /// y - X beta on the original (unweighted) scale.
  Eigen::VectorXd residuals;
  /// (X' W X)^{-1}
  Eigen::MatrixXd xtx_inv;
};

/// Weighted least squares via column-pivoted QR. Throws NumericalError naming
/// the dependent columns when X is rank deficient.
OlsFit fit_ols(const DesignMatrix& dm);

struct ClusteredVcov {
  Eigen::MatrixXd vcov;
  /// Clusters whose (I - H_gg) had eigenvalues below the floor (CR2 only).
  std::size_t pseudo_inverse_clusters = 0;
};

inline constexpr double kCr2EigenFloor = 1e-12;

/// Sandwich covariance (X'WX)^{-1} [sum_g X_g' A_g e_g e_g' A_g X_g] (X'WX)^{-1}
/// on the sqrt(W)-scaled system. CR1 multiplies CR0 by
/// G/(G-1) * (n-1)/(n-p); CR2 uses A_g = (I - H_gg)^{-1/2}.
ClusteredVcov vcov_clustered(const OlsFit& fit, const DesignMatrix& dm, VcovType type);

struct EstimateOptions {
  VcovType vcov = VcovType::CR2;
  ClusterBy cluster = ClusterBy::Subject;
  double alpha = 0.05;
  OutcomeKind outcome = OutcomeKind::PairChoice;
  /// Critical values and p-values from t(G - 1) instead of the normal.
  bool use_t = false;
};

struct AmceFit {
  std::vector<CoefficientLabel> labels;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  Eigen::VectorXd z;
  Eigen::VectorXd p;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::size_t n_params = 0;
  VcovType vcov_type = VcovType::CR2;
  OutcomeKind outcome_kind = OutcomeKind::PairChoice;
  double alpha = 0.05;
  bool use_t = false;
  std::size_t pseudo_inverse_clusters = 0;

  std::optional<std::size_t> index_of(const CoefficientLabel& label) const;
};

/// OLS + clustered covariance + inference on an already-built design.
AmceFit fit_design(const DesignMatrix& dm, const EstimateOptions& options);

/// Ranked data: PairChoice expands to pairs, NormalizedRank regresses the
/// (K-1)-weighted normalized rank; both give the same coefficients.
/// Forced-choice data: the choice indicator per profile under either kind.
AmceFit estimate_amce(const ConjointDataset& d, const EstimateOptions& options = {});
AmceFit estimate_amce(const PairDataset& pairs, const EstimateOptions& options = {});

struct ZTestRow {
  CoefficientLabel label;
  double difference = 0.0;
  double z = 0.0;
  double p = 1.0;
};

struct ZTestResult {
  std::vector<ZTestRow> rows;
  /// Labels present in only one of the fits.
  std::vector<CoefficientLabel> skipped;
};

/// z = (b_a - b_b) / sqrt(se_a^2 + se_b^2) for every AMCE label the two fits
/// share. Throws DataError if they share none.
ZTestResult z_test_coefficients(const AmceFit& a, const AmceFit& b);

/// z and two-sided normal p for two independent estimates.
ZTestRow z_test(double estimate_a, double se_a, double estimate_b, double se_b);

enum class PositionOutcome { NormalizedRank, Rank };

/// Regresses the outcome on display-position dummies (position 1 baseline,
/// labelled attribute "position") plus attribute dummies. Ranked data uses
/// the normalized rank by default (positive = preferred) or the raw rank;
/// forced-choice data uses the choice indicator.
AmceFit position_effect_check(const ConjointDataset& d, const EstimateOptions& options = {},
                              PositionOutcome outcome = PositionOutcome::NormalizedRank);

}  // namespace rankjoint
