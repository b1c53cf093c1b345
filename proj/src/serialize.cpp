#include "rankjoint/serialize.hpp"

#include <cmath>

#include "rankjoint/error.hpp"

namespace rankjoint {

namespace {

// JSON has no NaN/Inf; map them to null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double get_num(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

}  // namespace

Json to_json(const CoefficientLabel& label) {
  return {{"attribute", label.attribute}, {"level", label.level}};
}

Json to_json(const AmceFit& fit) {
  Json coefficients = Json::array();
  for (std::size_t i = 0; i < fit.labels.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    coefficients.push_back({{"attribute", fit.labels[i].attribute},
                            {"level", fit.labels[i].level},
                            {"estimate", num(fit.beta(k))},
                            {"se", num(fit.se(k))},
                            {"ci_lower", num(fit.ci_lower(k))},
                            {"ci_upper", num(fit.ci_upper(k))},
                            {"z", num(fit.z(k))},
                            {"p", num(fit.p(k))}});
  }
  Json vcov = Json::array();
  for (Eigen::Index r = 0; r < fit.vcov.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < fit.vcov.cols(); ++c) row.push_back(num(fit.vcov(r, c)));
    vcov.push_back(std::move(row));
  }
  return {{"coefficients", std::move(coefficients)},
          {"n_obs", fit.n_obs},
          {"n_clusters", fit.n_clusters},
          {"n_params", fit.n_params},
          {"vcov_type", std::string(to_string(fit.vcov_type))},
          {"outcome", std::string(to_string(fit.outcome_kind))},
          {"alpha", fit.alpha},
          {"critical_values", fit.use_t ? "t" : "normal"},
          {"cr2_pseudo_inverse_clusters", fit.pseudo_inverse_clusters},
          {"vcov", std::move(vcov)}};
}

AmceFit fit_from_json(const Json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("coefficients")) {
      throw DataError("fit JSON has no 'coefficients' array");
    }
    AmceFit fit;
    const auto& coefs = doc.at("coefficients");
    const auto n = static_cast<Eigen::Index>(coefs.size());
    fit.beta.resize(n);
    fit.se.resize(n);
    fit.ci_lower.resize(n);
    fit.ci_upper.resize(n);
    fit.z.resize(n);
    fit.p.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = coefs.at(static_cast<std::size_t>(i));
      fit.labels.push_back({c.at("attribute").get<std::string>(), c.value("level", std::string())});
      fit.beta(i) = get_num(c.at("estimate"));
      fit.se(i) = get_num(c.at("se"));
      fit.ci_lower(i) = c.contains("ci_lower") ? get_num(c["ci_lower"]) : NAN;
      fit.ci_upper(i) = c.contains("ci_upper") ? get_num(c["ci_upper"]) : NAN;
      fit.z(i) = c.contains("z") ? get_num(c["z"]) : NAN;
      fit.p(i) = c.contains("p") ? get_num(c["p"]) : NAN;
    }
    if (doc.contains("vcov") && doc["vcov"].size() == static_cast<std::size_t>(n)) {
      fit.vcov.resize(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
          fit.vcov(r, c) = get_num(doc["vcov"][static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
        }
      }
    } else {
      fit.vcov = fit.se.array().square().matrix().asDiagonal();
    }
    fit.n_obs = doc.value("n_obs", std::size_t{0});
    fit.n_clusters = doc.value("n_clusters", std::size_t{0});
    fit.n_params = doc.value("n_params", static_cast<std::size_t>(n));
    fit.vcov_type = parse_vcov(doc.value("vcov_type", std::string("CR2")));
    fit.outcome_kind = parse_outcome(doc.value("outcome", std::string("pair-choice")));
    fit.alpha = doc.value("alpha", 0.05);
    fit.use_t = doc.value("critical_values", std::string("normal")) == "t";
    fit.pseudo_inverse_clusters = doc.value("cr2_pseudo_inverse_clusters", std::size_t{0});
    return fit;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed fit JSON: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed fit JSON: ") + e.what());
  }
}

Json to_json(const ZTestResult& result) {
  Json rows = Json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"attribute", r.label.attribute}, {"level", r.label.level},
                    {"difference", num(r.difference)}, {"z", num(r.z)}, {"p", num(r.p)}});
  }
  Json skipped = Json::array();
  for (const auto& l : result.skipped) skipped.push_back(to_json(l));
  return {{"tests", std::move(rows)}, {"skipped", std::move(skipped)}};
}

Json to_json(const EfficiencyReport& r) {
  return {{"K", r.K}, {"variance_ratio", num(r.variance_ratio)}, {"se_ratio", num(r.se_ratio)},
          {"se_reduction", num(r.se_reduction)},
          {"fcc_sample_multiplier", num(r.fcc_sample_multiplier)}};
}

Json to_json(const SeComparison& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows) {
    rows.push_back({{"attribute", r.label.attribute}, {"level", r.label.level},
                    {"se_a", num(r.se_a)}, {"se_b", num(r.se_b)}, {"ratio", num(r.ratio)}});
  }
  return {{"coefficients", std::move(rows)}, {"mean_ratio", num(c.mean_ratio)},
          {"ratio_of_means", num(c.ratio_of_means)}, {"reduction", num(c.reduction)}};
}

Json importance_json(const AmceFit& fit) {
  Json out = Json::array();
  for (const auto& [attribute, value] : attribute_importance(fit)) {
    out.push_back({{"attribute", attribute}, {"importance", num(value)}});
  }
  return out;
}

Json to_json(const ViolationSummary& s) {
  Json conditions = Json::array();
  for (const auto& c : s.conditions) {
    conditions.push_back({{"condition", c.condition}, {"n", c.n},
                          {"violations", c.violations}, {"rate", num(c.rate)}});
  }
  Json tests = Json::array();
  for (const auto& t : s.tests) {
    tests.push_back({{"condition_a", t.condition_a}, {"condition_b", t.condition_b},
                     {"z", num(t.statistic)}, {"p", num(t.p)}, {"p_adjusted", num(t.p_adjusted)}});
  }
  return {{"conditions", std::move(conditions)}, {"tests", std::move(tests)}};
}

Json to_json(const RefitComparison& r) {
  Json rows = Json::array();
  for (const auto& d : r.deviations) {
    rows.push_back({{"attribute", d.label.attribute}, {"level", d.label.level},
                    {"original", num(d.original)}, {"filtered", num(d.filtered)},
                    {"deviation", num(d.deviation)}});
  }
  return {{"deviations", std::move(rows)},
          {"mean_absolute_deviation", num(r.mean_absolute_deviation)},
          {"max_absolute_deviation", num(r.max_absolute_deviation)},
          {"excluded_subjects", r.excluded_subjects},
          {"n_obs_original", r.original.n_obs},
          {"n_obs_filtered", r.filtered.n_obs}};
}

namespace {

Json arm_json(const PowerResult& arm) {
  Json coefficients = Json::array();
  for (const auto& c : arm.coefficients) {
    coefficients.push_back({{"grid_index", c.grid_index}, {"attribute", c.label.attribute},
                            {"level", c.label.level}, {"gamma", num(c.gamma)},
                            {"true_amce", num(c.true_amce)}, {"power", num(c.power)},
                            {"mean_estimate", num(c.mean_estimate)},
                            {"empirical_se", num(c.empirical_se)}, {"mean_se", num(c.mean_se)}});
  }
  return {{"arm", arm.arm}, {"K", arm.K}, {"replications", arm.replications},
          {"alpha", arm.alpha}, {"coefficients", std::move(coefficients)}};
}

}  // namespace

Json to_json(const PowerComparison& p) {
  Json diff = Json::array();
  for (std::size_t i = 0; i < p.difference.size(); ++i) {
    diff.push_back({{"gamma", num(p.rcc.coefficients[i].gamma)},
                    {"power_difference", num(p.difference[i])}});
  }
  return {{"rcc", arm_json(p.rcc)}, {"fcc", arm_json(p.fcc)}, {"difference", std::move(diff)}};
}

Json to_json(const std::vector<NullEfficiencyRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"K", r.K}, {"mean_se_ranked", num(r.mean_se_ranked)},
                   {"mean_se_forced", num(r.mean_se_forced)},
                   {"empirical_se_ratio", num(r.empirical_ratio)},
                   {"theoretical_se_ratio", num(r.theoretical_ratio)}});
  }
  return out;
}

Json to_json(const SamplingDistribution& dist, bool include_draws) {
  Json coefficients = Json::array();
  for (std::size_t c = 0; c < dist.labels.size(); ++c) {
    const auto& r = dist.ranked_summary[c];
    const auto& f = dist.forced_summary[c];
    Json entry{{"attribute", dist.labels[c].attribute}, {"level", dist.labels[c].level},
               {"rcc", {{"mean", num(r.mean)}, {"variance", num(r.variance)}, {"mc_se", num(r.mc_se)}}},
               {"fcc", {{"mean", num(f.mean)}, {"variance", num(f.variance)}, {"mc_se", num(f.mc_se)}}}};
    if (include_draws) {
      entry["rcc_draws"] = dist.ranked[c];
      entry["fcc_draws"] = dist.forced[c];
    }
    coefficients.push_back(std::move(entry));
  }
  return {{"coefficients", std::move(coefficients)}};
}

Json to_json(const SensitivityResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json coefs = Json::array();
    for (std::size_t c = 0; c < r.labels.size(); ++c) {
      coefs.push_back({{"attribute", r.labels[c].attribute}, {"level", r.labels[c].level},
                       {"mean", num(row.mean_coefficients[c])}, {"sd", num(row.sd_coefficients[c])}});
    }
    rows.push_back({{"p", num(row.p)}, {"mean_abs_deviation", num(row.mean_deviation)},
                    {"sd_abs_deviation", num(row.sd_deviation)}, {"coefficients", std::move(coefs)}});
  }
  Json baseline = Json::array();
  for (std::size_t c = 0; c < r.labels.size(); ++c) {
    baseline.push_back({{"attribute", r.labels[c].attribute}, {"level", r.labels[c].level},
                        {"estimate", num(r.baseline[c])}});
  }
  return {{"baseline", std::move(baseline)}, {"unordered_pairs", r.unordered_pairs},
          {"iterations", r.iterations}, {"results", std::move(rows)}};
}

Json to_json(const std::vector<Violation>& violations) {
  Json out = Json::array();
  for (const auto& v : violations) {
    out.push_back({{"subject", v.subject_id}, {"task", v.task_id}, {"message", v.message}});
  }
  return out;
}

}  // namespace rankjoint
