#include "rankjoint/expansion.hpp"

#include <fstream>

#include "rankjoint/csv.hpp"
#include "rankjoint/error.hpp"

namespace rankjoint {

PairDataset expand_dataset(const ConjointDataset& d) {
  if (d.mode() != ResponseMode::Ranked) {
    throw DataError("rank expansion requires a ranked dataset");
  }
  const auto views = group_tasks(d);
  std::size_t total = 0;
  for (const auto& v : views) total += v.K() * (v.K() - 1);

  std::vector<PairRow> rows;
  rows.reserve(total);
  for (const auto& v : views) {
    for (auto focal : v.rows) {
      const auto& f = d.row(focal);
      for (auto opponent : v.rows) {
        if (opponent == focal) continue;
        const auto& o = d.row(opponent);
        rows.push_back({v.subject, v.task, f.position, o.position, focal, opponent,
                        f.outcome < o.outcome ? 1 : 0});
      }
    }
  }
  return PairDataset(d, PairProvenance::Expanded, std::move(rows));
}

PairDataset pairs_from_forced_choice(const ConjointDataset& d) {
  if (d.mode() != ResponseMode::ForcedChoice) {
    throw DataError("expected a forced-choice dataset");
  }
  std::vector<PairRow> rows;
  rows.reserve(d.size());
  for (const auto& v : group_tasks(d)) {
    if (v.K() != 2) {
      throw DataError("subject " + d.subject_id(v.subject) + ", task " +
                      d.task_id(v.task) +
                      ": native forced-choice pairs need exactly 2 profiles");
    }
    const auto a = v.rows[0];
    const auto b = v.rows[1];
    rows.push_back({v.subject, v.task, d.row(a).position, d.row(b).position, a, b,
                    d.row(a).outcome});
    rows.push_back({v.subject, v.task, d.row(b).position, d.row(a).position, b, a,
                    d.row(b).outcome});
  }
  return PairDataset(d, PairProvenance::NativeForcedChoice, std::move(rows));
}

double normalized_rank(int rank, int K) {
  if (K < 2) throw UsageError("normalized_rank: K must be at least 2");
  if (rank < 1 || rank > K) {
    throw UsageError("normalized_rank: rank " + std::to_string(rank) +
                     " outside 1.." + std::to_string(K));
  }
  return static_cast<double>(K - rank) / static_cast<double>(K - 1);
}

std::vector<NormalizedRankRow> normalized_rank_dataset(const ConjointDataset& d) {
  if (d.mode() != ResponseMode::Ranked) {
    throw DataError("normalized ranks require a ranked dataset");
  }
  std::vector<NormalizedRankRow> out;
  out.reserve(d.size());
  for (const auto& v : group_tasks(d)) {
    const int K = static_cast<int>(v.K());
    for (auto i : v.rows) {
      const auto& r = d.row(i);
      out.push_back({r.subject, r.task, r.position, i, normalized_rank(r.outcome, K)});
    }
  }
  return out;
}

void write_pairs_csv(const PairDataset& pairs, std::ostream& out,
                     PairCsvOptions options) {
  const auto& d = pairs.source();
  const auto& schema = d.schema();
  std::vector<std::string> fields{"subject", "task", "focal_position",
                                  "opponent_position"};
  for (const auto& a : schema.attributes()) fields.push_back(a.name);
  if (options.with_opponent) {
    for (const auto& a : schema.attributes()) fields.push_back("opponent_" + a.name);
  }
  fields.emplace_back("y");
  csv::write_record(out, fields);

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = pairs.rows()[i];
    fields.clear();
    fields.push_back(d.subject_id(r.subject));
    fields.push_back(d.task_id(r.task));
    fields.push_back(std::to_string(r.focal_position));
    fields.push_back(std::to_string(r.opponent_position));
    for (std::size_t a = 0; a < schema.size(); ++a) {
      fields.push_back(d.level_name(r.focal_row, a));
    }
    if (options.with_opponent) {
      for (std::size_t a = 0; a < schema.size(); ++a) {
        fields.push_back(d.level_name(r.opponent_row, a));
      }
    }
    fields.push_back(std::to_string(r.y));
    csv::write_record(out, fields);
  }
}

void write_pairs_csv(const PairDataset& pairs, const std::filesystem::path& path,
                     PairCsvOptions options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_pairs_csv(pairs, out, options);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace rankjoint
