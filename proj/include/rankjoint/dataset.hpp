#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rankjoint/schema.hpp"

namespace rankjoint {

/// Ranked: the outcome column holds ranks, 1 = most preferred.
/// ForcedChoice: the outcome column holds 0/1 with one chosen profile per task.
enum class ResponseMode { Ranked, ForcedChoice };

std::string_view to_string(ResponseMode mode);
ResponseMode parse_mode(std::string_view text);

/// One displayed profile. Subject and task are indices into the dataset's id
/// tables; levels are stored separately as per-attribute level indices.
struct ProfileRow {
  std::uint32_t subject = 0;
  std::uint32_t task = 0;
  int position = 0;
  int outcome = 0;
};

/// Long-format conjoint responses: one row per displayed profile.
class ConjointDataset {
 public:
  ConjointDataset(AttributeSchema schema, ResponseMode mode);

  const AttributeSchema& schema() const { return schema_; }
  ResponseMode mode() const { return mode_; }

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const ProfileRow& row(std::size_t i) const { return rows_[i]; }
  std::span<const int> levels(std::size_t i) const {
    return {codes_.data() + i * schema_.size(), schema_.size()};
  }
  const std::string& level_name(std::size_t row, std::size_t attribute) const;

  std::uint32_t intern_subject(std::string_view id);
  std::uint32_t intern_task(std::string_view id);
  const std::string& subject_id(std::uint32_t s) const { return subjects_[s]; }
  const std::string& task_id(std::uint32_t t) const { return tasks_[t]; }
  std::size_t num_subjects() const { return subjects_.size(); }

  void reserve(std::size_t rows);
  void add_row(std::uint32_t subject, std::uint32_t task, int position,
               std::span<const int> levels, int outcome);
  void add_row(std::string_view subject, std::string_view task, int position,
               std::span<const int> levels, int outcome);
  void set_outcome(std::size_t i, int outcome) { rows_[i].outcome = outcome; }

  /// Copy holding only rows whose subject id satisfies `keep`. Row order is
  /// preserved.
  ConjointDataset filter_subjects(
      const std::function<bool(const std::string&)>& keep) const;

 private:
  AttributeSchema schema_;
  ResponseMode mode_;
  std::vector<ProfileRow> rows_;
  std::vector<int> codes_;
  std::vector<std::string> subjects_;
  std::vector<std::string> tasks_;
  std::unordered_map<std::string, std::uint32_t> subject_index_;
  std::unordered_map<std::string, std::uint32_t> task_index_;
};

struct Violation {
  std::string subject_id;
  std::string task_id;
  std::string message;
};

/// Every invariant violation, one entry per offending task, in task order.
std::vector<Violation> validate_dataset(const ConjointDataset& d);

/// Rows of one (subject, task) group, sorted by display position.
struct TaskView {
  std::uint32_t subject = 0;
  std::uint32_t task = 0;
  std::vector<std::size_t> rows;
  std::size_t K() const { return rows.size(); }
};

/// One view per distinct (subject, task) pair, ordered by subject id then
/// task id (numeric ids compare numerically).
std::vector<TaskView> group_tasks(const ConjointDataset& d);

/// Orders numeric strings by value and everything else lexicographically.
bool natural_less(std::string_view a, std::string_view b);

struct LoadOptions {
  /// Treat the rank column as 1 = least preferred and flip it on ingest.
  bool invert_ranks = false;
};

/// Reads the long-format CSV contract: `subject,task,position,rank|choice`
/// plus one column per schema attribute. Throws DataError on missing columns,
/// unknown levels, malformed numbers or any validate_dataset violation.
ConjointDataset load_dataset_csv(const std::filesystem::path& path,
                                 const AttributeSchema& schema,
                                 ResponseMode mode, LoadOptions options = {});
ConjointDataset read_dataset_csv(std::istream& in, const AttributeSchema& schema,
                                 ResponseMode mode, LoadOptions options = {});

void write_dataset_csv(const ConjointDataset& d, const std::filesystem::path& path);
void write_dataset_csv(const ConjointDataset& d, std::ostream& out);

}  // namespace rankjoint
