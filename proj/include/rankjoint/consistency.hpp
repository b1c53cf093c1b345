#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rankjoint/amce.hpp"

namespace rankjoint {

enum class RetestKind { Transitivity, IIA };

std::string_view to_string(RetestKind kind);
RetestKind parse_retest_kind(std::string_view text);

/// A re-presented comparison of profiles a and b. `original_a_better` is the
/// order implied by the main-task ranking; `retest_a_better` is the order in
/// the re-presented task (for IIA, restricted to the pair within the
/// three-profile ranking).
struct RetestRecord {
  std::string subject_id;
  RetestKind kind = RetestKind::Transitivity;
  bool original_a_better = true;
  bool retest_a_better = true;
};

/// True when the forced-choice retest contradicts the main ranking.
bool transitivity_violation(const RetestRecord& r);
/// True when the pair's relative order changed after adding a third profile.
bool iia_violation(const RetestRecord& r);
/// Dispatches on the record's kind.
bool is_violation(const RetestRecord& r);

/// Focal-pair order of an IIA re-ranking of three profiles: a is preferred
/// when its rank is lower. The added profile's rank is ignored.
bool iia_retest_order(int rank_a, int rank_b);

struct ProportionTest {
  double statistic = 0.0;
  double p = 1.0;
};

/// Pooled two-proportion z-test, two-sided. With a continuity correction the
/// absolute difference is shrunk by (1/n1 + 1/n2)/2, floored at zero. A zero
/// pooled variance (both proportions 0 or both 1) gives z = 0, p = 1.
ProportionTest two_proportion_test(long x1, long n1, long x2, long n2,
                                   bool continuity_correction = false);

enum class PAdjust { None, Bonferroni, Holm };

std::string_view to_string(PAdjust a);
PAdjust parse_p_adjust(std::string_view text);

struct ConditionRate {
  std::string condition;
  long n = 0;
  long violations = 0;
  double rate = 0.0;
};

struct PairwiseProportionTest {
  std::string condition_a;
  std::string condition_b;
  double statistic = 0.0;
  double p = 1.0;
  double p_adjusted = 1.0;
};

struct ViolationSummary {
  std::vector<ConditionRate> conditions;
  std::vector<PairwiseProportionTest> tests;
};

struct SummaryOptions {
  bool continuity_correction = false;
  PAdjust adjust = PAdjust::None;
};

/// Violation rates per condition (conditions in natural order) and every
/// pairwise proportion test. Throws DataError for a subject without a label.
ViolationSummary summarize_violations(const std::vector<RetestRecord>& records,
                                      const std::map<std::string, std::string>& condition_of,
                                      const SummaryOptions& options = {});

/// Same tests from already-aggregated counts.
ViolationSummary summarize_counts(const std::vector<ConditionRate>& counts,
                                  const SummaryOptions& options = {});

struct DeviationRow {
  CoefficientLabel label;
  double original = 0.0;
  double filtered = 0.0;
  double deviation = 0.0;  // filtered - original
};

struct RefitComparison {
  AmceFit original;
  AmceFit filtered;
  std::vector<DeviationRow> deviations;
  double mean_absolute_deviation = 0.0;
  double max_absolute_deviation = 0.0;
  std::size_t excluded_subjects = 0;
};

/// Drops every subject with at least one violation of either kind and
/// refits. Throws DataError when records name subjects absent from `d` or
/// when no subject would remain.
RefitComparison refit_excluding_violators(const ConjointDataset& d,
                                          const std::vector<RetestRecord>& records,
                                          const EstimateOptions& options = {});

/// CSV with columns subject,kind,original_better,retest_better.
std::vector<RetestRecord> load_retest_csv(const std::filesystem::path& path);
std::vector<RetestRecord> read_retest_csv(std::istream& in);

/// CSV with columns subject,condition.
std::map<std::string, std::string> load_conditions_csv(const std::filesystem::path& path);
std::map<std::string, std::string> read_conditions_csv(std::istream& in);

}  // namespace rankjoint
