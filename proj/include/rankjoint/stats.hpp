#pragma once

namespace rankjoint::stats {

double normal_cdf(double x);
double normal_quantile(double p);

/// Two-sided p-value of a standard-normal statistic.
double normal_two_sided_p(double z);

double student_t_quantile(double p, double df);
double student_t_two_sided_p(double t, double df);

double chi_squared_upper_quantile(double alpha, double df);

}  // namespace rankjoint::stats
