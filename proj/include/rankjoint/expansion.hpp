#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <vector>

#include "rankjoint/dataset.hpp"

namespace rankjoint {

enum class PairProvenance { Expanded, NativeForcedChoice };

/// A directed comparison: the focal profile beat the opponent when y == 1.
struct PairRow {
  std::uint32_t subject = 0;
  std::uint32_t task = 0;
  int focal_position = 0;
  int opponent_position = 0;
  std::size_t focal_row = 0;     // row index in the source dataset
  std::size_t opponent_row = 0;  // row index in the source dataset
  int y = 0;
};

/// Pairwise choice rows derived from a ConjointDataset. The source dataset is
/// held by value so attribute levels of either profile can be looked up.
class PairDataset {
 public:
  PairDataset(ConjointDataset source, PairProvenance provenance,
              std::vector<PairRow> rows)
      : source_(std::move(source)), provenance_(provenance), rows_(std::move(rows)) {}

  const ConjointDataset& source() const { return source_; }
  const AttributeSchema& schema() const { return source_.schema(); }
  PairProvenance provenance() const { return provenance_; }
  const std::vector<PairRow>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  std::span<const int> focal_levels(std::size_t i) const {
    return source_.levels(rows_[i].focal_row);
  }
  std::span<const int> opponent_levels(std::size_t i) const {
    return source_.levels(rows_[i].opponent_row);
  }

  void set_outcome(std::size_t i, int y) { rows_[i].y = y; }

 private:
  ConjointDataset source_;
  PairProvenance provenance_;
  std::vector<PairRow> rows_;
};

/// Expands every ranked task of size K into 2*C(K,2) directed rows, with
/// y = 1 iff the focal profile is ranked above (lower rank than) the opponent.
/// Output is sorted by subject, task, focal position, opponent position.
PairDataset expand_dataset(const ConjointDataset& d);

/// Wraps K = 2 forced-choice data as a PairDataset (one row per profile,
/// y = chosen). Throws DataError if any task has K != 2.
PairDataset pairs_from_forced_choice(const ConjointDataset& d);

/// (K - rank) / (K - 1): 1 for the top profile, 0 for the bottom one.
double normalized_rank(int rank, int K);

struct NormalizedRankRow {
  std::uint32_t subject = 0;
  std::uint32_t task = 0;
  int position = 0;
  std::size_t row = 0;  // row index in the source dataset
  double value = 0.0;
};

/// One row per profile, in group_tasks order.
std::vector<NormalizedRankRow> normalized_rank_dataset(const ConjointDataset& d);

struct PairCsvOptions {
  /// Append opponent attributes as `opponent_<attribute>` columns.
  bool with_opponent = false;
};

/// Columns: subject,task,focal_position,opponent_position,<attributes...>,y
void write_pairs_csv(const PairDataset& pairs, std::ostream& out,
                     PairCsvOptions options = {});
void write_pairs_csv(const PairDataset& pairs, const std::filesystem::path& path,
                     PairCsvOptions options = {});

}  // namespace rankjoint
