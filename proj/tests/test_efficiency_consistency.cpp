#include "doctest.h"

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "rankjoint/consistency.hpp"
#include "rankjoint/efficiency.hpp"
#include "rankjoint/error.hpp"

using namespace rankjoint;

namespace {

AmceFit fake_fit(std::vector<std::pair<CoefficientLabel, std::pair<double, double>>> coefs) {
  AmceFit f;
  const auto n = static_cast<Eigen::Index>(coefs.size());
  f.beta.resize(n);
  f.se.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.labels.push_back(coefs[static_cast<std::size_t>(i)].first);
    f.beta(i) = coefs[static_cast<std::size_t>(i)].second.first;
    f.se(i) = coefs[static_cast<std::size_t>(i)].second.second;
  }
  return f;
}

// erfc-free normal tail: 1 - Phi(x) by Simpson on [0, x].
double upper_tail(double x) {
  const int n = 20000;
  const double h = x / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    s += std::exp(-0.5 * t * t) * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return 0.5 - s * h / 3.0 / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("theoretical variance ratios") {
  // exact rationals 2(K+1) / (3K(K-1))
  CHECK(theoretical_variance_ratio(2) == 1.0);
  CHECK(theoretical_variance_ratio(3) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  CHECK(theoretical_variance_ratio(4) == doctest::Approx(5.0 / 18.0).epsilon(1e-15));
  CHECK(theoretical_variance_ratio(6) == doctest::Approx(7.0 / 45.0).epsilon(1e-15));
  CHECK(std::lround(100 * theoretical_se_reduction(3)) == 33);
  CHECK(std::lround(100 * theoretical_se_reduction(4)) == 47);
  CHECK(std::lround(100 * theoretical_se_reduction(6)) == 61);
  CHECK(fcc_sample_multiplier(3) == doctest::Approx(2.25));
  CHECK(fcc_sample_multiplier(6) == doctest::Approx(45.0 / 7.0));
  CHECK(fcc_sample_multiplier_from_reduction(0.5) == doctest::Approx(4.0));
  CHECK(fcc_sample_multiplier_from_reduction(0.0) == 1.0);
  CHECK_THROWS_AS(fcc_sample_multiplier_from_reduction(1.0), UsageError);
  CHECK_THROWS_AS(theoretical_variance_ratio(1), UsageError);
  const auto r = theoretical_efficiency(4);
  CHECK(r.se_ratio == doctest::Approx(std::sqrt(5.0 / 18.0)));
  CHECK(r.se_reduction == doctest::Approx(1.0 - std::sqrt(5.0 / 18.0)));
}

TEST_CASE("empirical SE comparison, precision per time and importance") {
  const CoefficientLabel icpt{kInterceptLabel, ""};
  const auto a = fake_fit({{icpt, {0.5, 0.01}}, {{"x", "1"}, {0.1, 0.02}}, {{"x", "2"}, {-0.3, 0.04}},
                           {{"y", "b"}, {0.2, 0.02}}});
  const auto b = fake_fit({{icpt, {0.5, 0.5}}, {{"x", "1"}, {0.1, 0.01}}, {{"x", "2"}, {-0.3, 0.02}},
                           {{"y", "b"}, {0.2, 0.02}}});
  const auto c = empirical_se_comparison(a, b);
  REQUIRE(c.rows.size() == 3);  // intercept excluded
  CHECK(c.mean_ratio == doctest::Approx((0.5 + 0.5 + 1.0) / 3.0));
  CHECK(c.ratio_of_means == doctest::Approx((0.05 / 3) / (0.08 / 3)));
  CHECK(c.reduction == doctest::Approx(1.0 / 3.0));

  // mean 1/se^2 for a: (2500 + 625 + 2500)/3
  CHECK(precision(a) == doctest::Approx(5625.0 / 3.0));
  CHECK(precision(a, PrecisionAggregation::MedianInverseVariance) == doctest::Approx(2500.0));
  CHECK(precision(a, PrecisionAggregation::InverseMeanSe) == doctest::Approx(1.0 / std::pow(0.08 / 3, 2)));
  CHECK(precision_per_time(a, 100.0) == doctest::Approx(5625.0 / 300.0));
  const double rel = relative_precision_per_time(a, 100.0, b, 150.0);
  CHECK(rel == doctest::Approx((precision(b) / 150.0) / (precision(a) / 100.0)));
  CHECK_THROWS_AS(precision_per_time(a, 0.0), UsageError);

  const auto imp = attribute_importance(a);
  REQUIRE(imp.size() == 2);
  CHECK(imp[0].first == "x");
  CHECK(imp[0].second == doctest::Approx(0.2));
  CHECK(imp[1].second == doctest::Approx(0.2));
  CHECK(parse_aggregation("median") == PrecisionAggregation::MedianInverseVariance);
  CHECK_THROWS_AS(parse_aggregation("mode"), UsageError);
}

TEST_CASE("two-proportion test against a hand computation") {
  // 124/950 vs 209/950
  const double p1 = 124.0 / 950, p2 = 209.0 / 950, pool = 333.0 / 1900;
  const double z = (p1 - p2) / std::sqrt(pool * (1 - pool) * (2.0 / 950));
  const auto t = two_proportion_test(124, 950, 209, 950);
  CHECK(t.statistic == doctest::Approx(z).epsilon(1e-13));
  CHECK(t.p == doctest::Approx(2.0 * upper_tail(std::abs(z))).epsilon(1e-6));
  CHECK(t.p < 0.001);

  const auto same = two_proportion_test(209, 950, 209, 950);
  CHECK(same.statistic == 0.0);
  CHECK(same.p == 1.0);
  CHECK(two_proportion_test(0, 10, 0, 20).p == 1.0);

  const auto cc = two_proportion_test(30, 100, 45, 100, true);
  const double pc = 0.375;
  const double zc = -(0.15 - 0.01) / std::sqrt(pc * (1 - pc) * 0.02);
  CHECK(cc.statistic == doctest::Approx(zc));
  CHECK_THROWS_AS(two_proportion_test(5, 4, 1, 4), UsageError);
}

TEST_CASE("violation summaries and p-value adjustment") {
  const auto s = summarize_counts({{"K6", 950, 209, 0}, {"K2", 950, 124, 0}, {"K4", 950, 209, 0}},
                                  SummaryOptions{false, PAdjust::Holm});
  REQUIRE(s.conditions.size() == 3);
  CHECK(s.conditions[0].condition == "K2");
  CHECK(s.conditions[1].rate == doctest::Approx(0.22).epsilon(1e-3));
  REQUIRE(s.tests.size() == 3);
  CHECK(s.tests[2].condition_a == "K4");
  CHECK(s.tests[2].p == 1.0);
  // holm: two equal smallest p-values get multiplied by 3 and 2, then made monotone
  CHECK(s.tests[0].p_adjusted == doctest::Approx(std::min(1.0, 3 * s.tests[0].p)));
  CHECK(s.tests[1].p_adjusted >= s.tests[0].p_adjusted);
  const auto bonf = summarize_counts({{"a", 10, 2, 0}, {"b", 10, 5, 0}}, {false, PAdjust::Bonferroni});
  CHECK(bonf.tests[0].p_adjusted == doctest::Approx(bonf.tests[0].p));
}

TEST_CASE("violation classification and record summaries") {
  const RetestRecord t_ok{"1", RetestKind::Transitivity, true, true};
  const RetestRecord t_bad{"2", RetestKind::Transitivity, true, false};
  const RetestRecord i_bad{"3", RetestKind::IIA, false, true};
  CHECK_FALSE(transitivity_violation(t_ok));
  CHECK(transitivity_violation(t_bad));
  CHECK(iia_violation(i_bad));
  CHECK_THROWS_AS(iia_violation(t_ok), UsageError);
  CHECK(iia_retest_order(1, 3));
  CHECK_FALSE(iia_retest_order(2, 1));

  const std::map<std::string, std::string> cond{{"1", "A"}, {"2", "A"}, {"3", "B"}};
  const auto s = summarize_violations({t_ok, t_bad, i_bad}, cond);
  REQUIRE(s.conditions.size() == 2);
  CHECK(s.conditions[0].n == 2);
  CHECK(s.conditions[0].violations == 1);
  CHECK_THROWS_AS(summarize_violations({{"9", RetestKind::IIA, true, true}}, cond), DataError);
}

TEST_CASE("retest and condition CSV parsing") {
  std::istringstream r("subject,kind,original_better,retest_better\n1,transitivity,1,0\n2,iia,0,0\n");
  const auto recs = read_retest_csv(r);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].kind == RetestKind::Transitivity);
  CHECK(is_violation(recs[0]));
  CHECK_FALSE(is_violation(recs[1]));
  std::istringstream bad("subject,kind,original_better,retest_better\n1,transitivity,2,0\n");
  CHECK_THROWS_AS(read_retest_csv(bad), DataError);
  std::istringstream c("subject,condition\n1,K2\n2,K4\n");
  const auto conds = read_conditions_csv(c);
  CHECK(conds.at("2") == "K4");
}

TEST_CASE("refit without violators drops whole subjects") {
  std::mt19937_64 rng(43);
  const auto schema = rjtest::random_schema(rng, 2);
  const auto d = rjtest::random_ranked(rng, schema, 30, 3, 3, 3);
  const std::vector<RetestRecord> recs{{"s1", RetestKind::Transitivity, true, false},
                                       {"s2", RetestKind::IIA, true, true},
                                       {"s3", RetestKind::IIA, true, false}};
  const auto r = refit_excluding_violators(d, recs);
  CHECK(r.excluded_subjects == 2);
  CHECK(r.filtered.n_obs == r.original.n_obs - 2 * 3 * 6);
  CHECK(r.filtered.n_clusters == 28);
  CHECK(r.max_absolute_deviation >= r.mean_absolute_deviation);
  CHECK_THROWS_AS(refit_excluding_violators(d, {{"nobody", RetestKind::IIA, true, false}}), DataError);
}
