#include "rankjoint/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "rankjoint/csv.hpp"
#include "rankjoint/error.hpp"
#include "rankjoint/stats.hpp"

namespace rankjoint {

std::string_view to_string(RetestKind kind) {
  return kind == RetestKind::Transitivity ? "transitivity" : "iia";
}

RetestKind parse_retest_kind(std::string_view text) {
  if (text == "transitivity") return RetestKind::Transitivity;
  if (text == "iia" || text == "IIA") return RetestKind::IIA;
  throw DataError("unknown retest kind '" + std::string(text) + "'");
}

bool transitivity_violation(const RetestRecord& r) {
  if (r.kind != RetestKind::Transitivity) {
    throw UsageError("transitivity_violation called on an IIA record");
  }
  return r.original_a_better != r.retest_a_better;
}

bool iia_violation(const RetestRecord& r) {
  if (r.kind != RetestKind::IIA) {
    throw UsageError("iia_violation called on a transitivity record");
  }
  return r.original_a_better != r.retest_a_better;
}

bool is_violation(const RetestRecord& r) {
  return r.kind == RetestKind::Transitivity ? transitivity_violation(r) : iia_violation(r);
}

bool iia_retest_order(int rank_a, int rank_b) {
  if (rank_a == rank_b) throw DataError("IIA re-ranking has tied focal ranks");
  return rank_a < rank_b;
}

ProportionTest two_proportion_test(long x1, long n1, long x2, long n2,
                                   bool continuity_correction) {
  if (n1 < 1 || n2 < 1 || x1 < 0 || x2 < 0 || x1 > n1 || x2 > n2) {
    throw UsageError("two_proportion_test: counts must satisfy 0 <= x <= n, n >= 1");
  }
  const double p1 = static_cast<double>(x1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(x2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  const double inv_n = 1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2);
  const double var = pooled * (1.0 - pooled) * inv_n;
  double diff = p1 - p2;
  if (continuity_correction) {
    const double shrunk = std::max(0.0, std::fabs(diff) - 0.5 * inv_n);
    diff = std::copysign(shrunk, diff);
  }
  ProportionTest out;
  if (var <= 0.0 || diff == 0.0) {
    out.statistic = 0.0;
    out.p = 1.0;
    return out;
  }
  out.statistic = diff / std::sqrt(var);
  out.p = stats::normal_two_sided_p(out.statistic);
  return out;
}

std::string_view to_string(PAdjust a) {
  switch (a) {
    case PAdjust::None: return "none";
    case PAdjust::Bonferroni: return "bonferroni";
    case PAdjust::Holm: return "holm";
  }
  return "?";
}

PAdjust parse_p_adjust(std::string_view text) {
  if (text == "none") return PAdjust::None;
  if (text == "bonferroni") return PAdjust::Bonferroni;
  if (text == "holm") return PAdjust::Holm;
  throw UsageError("unknown p-value adjustment '" + std::string(text) + "'");
}

namespace {

void adjust_p_values(std::vector<PairwiseProportionTest>& tests, PAdjust method) {
  const auto m = static_cast<double>(tests.size());
  for (auto& t : tests) t.p_adjusted = t.p;
  if (method == PAdjust::Bonferroni) {
    for (auto& t : tests) t.p_adjusted = std::min(1.0, t.p * m);
  } else if (method == PAdjust::Holm) {
    std::vector<std::size_t> order(tests.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return tests[a].p < tests[b].p; });
    double running = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const double adj = std::min(1.0, (m - static_cast<double>(k)) * tests[order[k]].p);
      running = std::max(running, adj);
      tests[order[k]].p_adjusted = running;
    }
  }
}

}  // namespace

ViolationSummary summarize_counts(const std::vector<ConditionRate>& counts,
                                  const SummaryOptions& options) {
  ViolationSummary out;
  out.conditions = counts;
  for (auto& c : out.conditions) {
    if (c.n < 1 || c.violations < 0 || c.violations > c.n) {
      throw DataError("condition '" + c.condition + "' has invalid counts");
    }
    c.rate = static_cast<double>(c.violations) / static_cast<double>(c.n);
  }
  std::stable_sort(out.conditions.begin(), out.conditions.end(),
                   [](const auto& a, const auto& b) { return natural_less(a.condition, b.condition); });
  for (std::size_t i = 0; i < out.conditions.size(); ++i) {
    for (std::size_t j = i + 1; j < out.conditions.size(); ++j) {
      const auto& a = out.conditions[i];
      const auto& b = out.conditions[j];
      const auto t = two_proportion_test(a.violations, a.n, b.violations, b.n,
                                         options.continuity_correction);
      out.tests.push_back({a.condition, b.condition, t.statistic, t.p, t.p});
    }
  }
  adjust_p_values(out.tests, options.adjust);
  return out;
}

ViolationSummary summarize_violations(const std::vector<RetestRecord>& records,
                                      const std::map<std::string, std::string>& condition_of,
                                      const SummaryOptions& options) {
  std::map<std::string, ConditionRate> by_condition;
  for (const auto& r : records) {
    const auto it = condition_of.find(r.subject_id);
    if (it == condition_of.end()) {
      throw DataError("subject '" + r.subject_id + "' has no condition label");
    }
    auto& c = by_condition[it->second];
    c.condition = it->second;
    ++c.n;
    c.violations += is_violation(r) ? 1 : 0;
  }
  std::vector<ConditionRate> counts;
  for (auto& [_, c] : by_condition) counts.push_back(c);
  return summarize_counts(counts, options);
}

RefitComparison refit_excluding_violators(const ConjointDataset& d,
                                          const std::vector<RetestRecord>& records,
                                          const EstimateOptions& options) {
  std::set<std::string> known;
  for (std::size_t s = 0; s < d.num_subjects(); ++s) {
    known.insert(d.subject_id(static_cast<std::uint32_t>(s)));
  }
  std::set<std::string> violators;
  for (const auto& r : records) {
    if (!known.count(r.subject_id)) {
      throw DataError("retest record references unknown subject '" + r.subject_id + "'");
    }
    if (is_violation(r)) violators.insert(r.subject_id);
  }
  if (violators.size() == known.size()) {
    throw DataError("every subject is a violator; nothing left to refit");
  }

  RefitComparison out;
  out.original = estimate_amce(d, options);
  const auto kept = d.filter_subjects([&](const std::string& s) { return !violators.count(s); });
  out.filtered = estimate_amce(kept, options);
  out.excluded_subjects = violators.size();

  double sum = 0.0;
  for (std::size_t i = 0; i < out.original.labels.size(); ++i) {
    const auto& label = out.original.labels[i];
    if (label.is_intercept()) continue;
    const auto j = out.filtered.index_of(label);
    if (!j) continue;
    DeviationRow row{label, out.original.beta(static_cast<Eigen::Index>(i)),
                     out.filtered.beta(static_cast<Eigen::Index>(*j)), 0.0};
    row.deviation = row.filtered - row.original;
    sum += std::fabs(row.deviation);
    out.max_absolute_deviation = std::max(out.max_absolute_deviation, std::fabs(row.deviation));
    out.deviations.push_back(std::move(row));
  }
  if (!out.deviations.empty()) {
    out.mean_absolute_deviation = sum / static_cast<double>(out.deviations.size());
  }
  return out;
}

namespace {

bool parse_flag(const std::string& text, std::size_t line, const char* column) {
  if (text == "1" || text == "true" || text == "TRUE") return true;
  if (text == "0" || text == "false" || text == "FALSE") return false;
  throw DataError("line " + std::to_string(line) + ": " + column +
                  " must be 0 or 1, got '" + text + "'");
}

std::size_t find_column(const std::vector<std::string>& header, std::string_view name,
                        std::string_view file) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError(std::string(file) + " CSV is missing column '" + std::string(name) + "'");
}

}  // namespace

std::vector<RetestRecord> read_retest_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw DataError("retest CSV is empty");
  const auto subject = find_column(*header, "subject", "retest");
  const auto kind = find_column(*header, "kind", "retest");
  const auto original = find_column(*header, "original_better", "retest");
  const auto retest = find_column(*header, "retest_better", "retest");
  std::vector<RetestRecord> out;
  while (auto record = reader.next()) {
    if (record->size() == 1 && record->front().empty()) continue;
    const auto line = reader.line();
    if (record->size() != header->size()) {
      throw DataError("retest CSV line " + std::to_string(line) + ": wrong field count");
    }
    const auto& f = *record;
    out.push_back({f[subject], parse_retest_kind(f[kind]),
                   parse_flag(f[original], line, "original_better"),
                   parse_flag(f[retest], line, "retest_better")});
  }
  return out;
}

std::vector<RetestRecord> load_retest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open retest file " + path.string());
  return read_retest_csv(in);
}

std::map<std::string, std::string> read_conditions_csv(std::istream& in) {
  csv::Reader reader(in);
  const auto header = reader.next();
  if (!header) throw DataError("conditions CSV is empty");
  const auto subject = find_column(*header, "subject", "conditions");
  const auto condition = find_column(*header, "condition", "conditions");
  std::map<std::string, std::string> out;
  while (auto record = reader.next()) {
    if (record->size() == 1 && record->front().empty()) continue;
    if (record->size() != header->size()) {
      throw DataError("conditions CSV line " + std::to_string(reader.line()) +
                      ": wrong field count");
    }
    const auto [it, inserted] = out.emplace((*record)[subject], (*record)[condition]);
    if (!inserted && it->second != (*record)[condition]) {
      throw DataError("subject '" + it->first + "' has conflicting condition labels");
    }
  }
  return out;
}

std::map<std::string, std::string> load_conditions_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open conditions file " + path.string());
  return read_conditions_csv(in);
}

}  // namespace rankjoint
