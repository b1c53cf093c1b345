#include "rankjoint/efficiency.hpp"

#include <algorithm>
#include <cmath>

#include "rankjoint/error.hpp"

namespace rankjoint {

double theoretical_variance_ratio(int K) {
  if (K < 2) throw UsageError("K must be at least 2");
  const double k = K;
  return 2.0 * (k + 1.0) / (3.0 * k * (k - 1.0));
}

double theoretical_se_reduction(int K) {
  return 1.0 - std::sqrt(theoretical_variance_ratio(K));
}

EfficiencyReport theoretical_efficiency(int K) {
  EfficiencyReport r;
  r.K = K;
  r.variance_ratio = theoretical_variance_ratio(K);
  r.se_ratio = std::sqrt(r.variance_ratio);
  r.se_reduction = 1.0 - r.se_ratio;
  r.fcc_sample_multiplier = 1.0 / r.variance_ratio;
  return r;
}

double fcc_sample_multiplier(int K) { return 1.0 / theoretical_variance_ratio(K); }

double fcc_sample_multiplier_from_reduction(double se_reduction) {
  if (!std::isfinite(se_reduction) || !(se_reduction < 1.0)) {
    throw UsageError("SE reduction must be finite and below 1");
  }
  const double ratio = 1.0 - se_reduction;
  return 1.0 / (ratio * ratio);
}

SeComparison empirical_se_comparison(const AmceFit& a, const AmceFit& b) {
  SeComparison out;
  double sum_a = 0.0;
  double sum_b = 0.0;
  double sum_ratio = 0.0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    if (a.labels[i].is_intercept()) continue;
    const auto j = b.index_of(a.labels[i]);
    if (!j) continue;
    SeRatioRow row;
    row.label = a.labels[i];
    row.se_a = a.se(static_cast<Eigen::Index>(i));
    row.se_b = b.se(static_cast<Eigen::Index>(*j));
    if (!(row.se_a > 0.0)) {
      throw NumericalError("reference fit has a non-positive SE for " + row.label.str());
    }
    row.ratio = row.se_b / row.se_a;
    sum_a += row.se_a;
    sum_b += row.se_b;
    sum_ratio += row.ratio;
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) throw DataError("the two fits share no coefficient labels");
  out.mean_ratio = sum_ratio / static_cast<double>(out.rows.size());
  out.ratio_of_means = sum_b / sum_a;
  out.reduction = 1.0 - out.mean_ratio;
  return out;
}

std::string_view to_string(PrecisionAggregation a) {
  switch (a) {
    case PrecisionAggregation::MeanInverseVariance: return "mean";
    case PrecisionAggregation::MedianInverseVariance: return "median";
    case PrecisionAggregation::InverseMeanSe: return "inverse-mean-se";
  }
  return "?";
}

PrecisionAggregation parse_aggregation(std::string_view text) {
  if (text == "mean") return PrecisionAggregation::MeanInverseVariance;
  if (text == "median") return PrecisionAggregation::MedianInverseVariance;
  if (text == "inverse-mean-se") return PrecisionAggregation::InverseMeanSe;
  throw UsageError("unknown precision aggregation '" + std::string(text) + "'");
}

double precision(const AmceFit& fit, PrecisionAggregation aggregation) {
  std::vector<double> se;
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    if (!fit.labels[i].is_intercept()) se.push_back(fit.se(static_cast<Eigen::Index>(i)));
  }
  if (se.empty()) throw DataError("fit has no AMCE coefficients");
  for (double s : se) {
    if (!(s > 0.0)) throw NumericalError("precision needs strictly positive standard errors");
  }
  switch (aggregation) {
    case PrecisionAggregation::MeanInverseVariance: {
      double sum = 0.0;
      for (double s : se) sum += 1.0 / (s * s);
      return sum / static_cast<double>(se.size());
    }
    case PrecisionAggregation::MedianInverseVariance: {
      std::vector<double> inv;
      for (double s : se) inv.push_back(1.0 / (s * s));
      std::sort(inv.begin(), inv.end());
      const auto m = inv.size() / 2;
      return inv.size() % 2 ? inv[m] : 0.5 * (inv[m - 1] + inv[m]);
    }
    case PrecisionAggregation::InverseMeanSe: {
      double sum = 0.0;
      for (double s : se) sum += s;
      const double mean = sum / static_cast<double>(se.size());
      return 1.0 / (mean * mean);
    }
  }
  return 0.0;
}

double precision_per_time(const AmceFit& fit, double mean_completion_seconds,
                          PrecisionAggregation aggregation) {
  if (!(mean_completion_seconds > 0.0)) {
    throw UsageError("mean completion time must be positive");
  }
  return precision(fit, aggregation) / mean_completion_seconds;
}

double relative_precision_per_time(const AmceFit& a, double time_a, const AmceFit& b,
                                   double time_b, PrecisionAggregation aggregation) {
  return precision_per_time(b, time_b, aggregation) /
         precision_per_time(a, time_a, aggregation);
}

std::vector<std::pair<std::string, double>> attribute_importance(const AmceFit& fit) {
  std::vector<std::pair<std::string, double>> out;
  std::vector<int> counts;
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    const auto& label = fit.labels[i];
    if (label.is_intercept()) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const auto& e) { return e.first == label.attribute; });
    if (it == out.end()) {
      out.emplace_back(label.attribute, 0.0);
      counts.push_back(0);
      it = out.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - out.begin());
    it->second += std::fabs(fit.beta(static_cast<Eigen::Index>(i)));
    ++counts[k];
  }
  for (std::size_t k = 0; k < out.size(); ++k) out[k].second /= counts[k];
  return out;
}

}  // namespace rankjoint
