#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rankjoint/amce.hpp"

namespace rankjoint {

/// Null-hypothesis efficiency of a K-profile ranked design relative to
/// forced choice with the same N and J.
struct EfficiencyReport {
  int K = 2;
  double variance_ratio = 1.0;
  double se_ratio = 1.0;
  double se_reduction = 0.0;
  double fcc_sample_multiplier = 1.0;
};

/// 2(K+1) / (3K(K-1)).
double theoretical_variance_ratio(int K);
/// 1 - sqrt(theoretical_variance_ratio(K)).
double theoretical_se_reduction(int K);
EfficiencyReport theoretical_efficiency(int K);

/// Forced-choice respondents needed per ranked respondent for equal precision.
double fcc_sample_multiplier(int K);
double fcc_sample_multiplier_from_reduction(double se_reduction);

struct SeRatioRow {
  CoefficientLabel label;
  double se_a = 0.0;
  double se_b = 0.0;
  double ratio = 0.0;  // se_b / se_a
};

struct SeComparison {
  std::vector<SeRatioRow> rows;
  double mean_ratio = 0.0;
  /// mean(se_b) / mean(se_a)
  double ratio_of_means = 0.0;
  /// 1 - mean_ratio
  double reduction = 0.0;
};

/// Per-coefficient SE ratios of fit_b over fit_a on shared AMCE labels.
SeComparison empirical_se_comparison(const AmceFit& a, const AmceFit& b);

/// How per-coefficient standard errors are collapsed into one precision value.
enum class PrecisionAggregation {
  MeanInverseVariance,    // mean of 1/se^2
  MedianInverseVariance,  // median of 1/se^2
  InverseMeanSe,          // 1/mean(se)^2
};

std::string_view to_string(PrecisionAggregation a);
PrecisionAggregation parse_aggregation(std::string_view text);

double precision(const AmceFit& fit,
                 PrecisionAggregation aggregation = PrecisionAggregation::MeanInverseVariance);

/// Precision per second of mean completion time.
double precision_per_time(const AmceFit& fit, double mean_completion_seconds,
                          PrecisionAggregation aggregation = PrecisionAggregation::MeanInverseVariance);

/// precision_per_time(b) / precision_per_time(a).
double relative_precision_per_time(
    const AmceFit& a, double time_a, const AmceFit& b, double time_b,
    PrecisionAggregation aggregation = PrecisionAggregation::MeanInverseVariance);

/// Mean absolute AMCE over each attribute's non-baseline levels, in the
/// order attributes first appear among the fit's labels.
std::vector<std::pair<std::string, double>> attribute_importance(const AmceFit& fit);

}  // namespace rankjoint
