#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rankjoint/serialize.hpp"

namespace rankjoint {

struct NamedFit {
  std::string name;
  AmceFit fit;
  /// Mean completion time in seconds, when known.
  std::optional<double> seconds;
};

struct ReportInputs {
  /// The first fit is the reference design for every comparison.
  std::vector<NamedFit> fits;
  std::vector<int> theoretical_K;
  /// A test-consistency summary document, embedded as-is.
  std::optional<Json> consistency;
  PrecisionAggregation aggregation = PrecisionAggregation::MeanInverseVariance;
};

struct Report {
  Json json;
  std::string text;
};

/// Merges fits, theoretical efficiency and violation summaries. Throws
/// DataError if the fits do not share one AMCE label set.
Report build_report(const ReportInputs& inputs);

}  // namespace rankjoint
