#include "rankjoint/stats.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "rankjoint/error.hpp"

namespace rankjoint::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("normal_quantile: p must be in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double normal_two_sided_p(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

double student_t_quantile(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw UsageError("student_t_quantile: p must be in (0,1)");
  if (!(df > 0.0)) throw UsageError("student_t_quantile: df must be positive");
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double student_t_two_sided_p(double t, double df) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  if (!(df > 0.0)) throw UsageError("student_t_two_sided_p: df must be positive");
  const boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double chi_squared_upper_quantile(double alpha, double df) {
  const boost::math::chi_squared_distribution<double> dist(df);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

}  // namespace rankjoint::stats
