#pragma once

// JSON forms of the library's result types. Objects use sorted keys, so equal
// values always serialize to identical bytes.

#include "json.hpp"

#include "rankjoint/amce.hpp"
#include "rankjoint/consistency.hpp"
#include "rankjoint/efficiency.hpp"
#include "rankjoint/simulation.hpp"

namespace rankjoint {

using Json = nlohmann::json;

Json to_json(const CoefficientLabel& label);

/// {coefficients:[{attribute, level, estimate, se, ci_lower, ci_upper, z, p}],
///  n_obs, n_clusters, n_params, vcov_type, outcome, alpha, critical_values,
///  cr2_pseudo_inverse_clusters, vcov}
Json to_json(const AmceFit& fit);
/// Inverse of to_json(AmceFit). Throws DataError on malformed input.
AmceFit fit_from_json(const Json& doc);

Json to_json(const ZTestResult& result);
Json to_json(const EfficiencyReport& report);
Json to_json(const SeComparison& comparison);
Json importance_json(const AmceFit& fit);
Json to_json(const ViolationSummary& summary);
Json to_json(const RefitComparison& refit);
Json to_json(const PowerComparison& power);
Json to_json(const std::vector<NullEfficiencyRow>& rows);
Json to_json(const SamplingDistribution& dist, bool include_draws);
Json to_json(const SensitivityResult& result);
Json to_json(const std::vector<Violation>& violations);

}  // namespace rankjoint
