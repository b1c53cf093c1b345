#include "rankjoint/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "rankjoint/csv.hpp"
#include "rankjoint/error.hpp"

namespace rankjoint {

std::string_view to_string(ResponseMode mode) {
  return mode == ResponseMode::Ranked ? "ranked" : "forced-choice";
}

ResponseMode parse_mode(std::string_view text) {
  if (text == "ranked" || text == "rank") return ResponseMode::Ranked;
  if (text == "forced-choice" || text == "forced" || text == "choice" ||
      text == "fcc") {
    return ResponseMode::ForcedChoice;
  }
  throw UsageError("unknown response mode '" + std::string(text) + "'");
}

ConjointDataset::ConjointDataset(AttributeSchema schema, ResponseMode mode)
    : schema_(std::move(schema)), mode_(mode) {}

const std::string& ConjointDataset::level_name(std::size_t row,
                                               std::size_t attribute) const {
  return schema_[attribute].levels[static_cast<std::size_t>(levels(row)[attribute])];
}

std::uint32_t ConjointDataset::intern_subject(std::string_view id) {
  auto [it, inserted] = subject_index_.try_emplace(
      std::string(id), static_cast<std::uint32_t>(subjects_.size()));
  if (inserted) subjects_.emplace_back(id);
  return it->second;
}

std::uint32_t ConjointDataset::intern_task(std::string_view id) {
  auto [it, inserted] = task_index_.try_emplace(
      std::string(id), static_cast<std::uint32_t>(tasks_.size()));
  if (inserted) tasks_.emplace_back(id);
  return it->second;
}

void ConjointDataset::reserve(std::size_t rows) {
  rows_.reserve(rows);
  codes_.reserve(rows * schema_.size());
}

void ConjointDataset::add_row(std::uint32_t subject, std::uint32_t task,
                              int position, std::span<const int> levels,
                              int outcome) {
  if (levels.size() != schema_.size()) {
    throw UsageError("add_row: expected " + std::to_string(schema_.size()) +
                     " level codes, got " + std::to_string(levels.size()));
  }
  for (std::size_t a = 0; a < levels.size(); ++a) {
    if (levels[a] < 0 ||
        static_cast<std::size_t>(levels[a]) >= schema_[a].levels.size()) {
      throw DataError("level code out of range for attribute '" +
                      schema_[a].name + "'");
    }
  }
  if (subject >= subjects_.size() || task >= tasks_.size()) {
    throw UsageError("add_row: subject or task index was never interned");
  }
  rows_.push_back({subject, task, position, outcome});
  codes_.insert(codes_.end(), levels.begin(), levels.end());
}

void ConjointDataset::add_row(std::string_view subject, std::string_view task,
                              int position, std::span<const int> levels,
                              int outcome) {
  const auto s = intern_subject(subject);
  const auto t = intern_task(task);
  add_row(s, t, position, levels, outcome);
}

ConjointDataset ConjointDataset::filter_subjects(
    const std::function<bool(const std::string&)>& keep) const {
  ConjointDataset out(schema_, mode_);
  std::vector<char> kept(subjects_.size());
  for (std::size_t s = 0; s < subjects_.size(); ++s) kept[s] = keep(subjects_[s]);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (!kept[r.subject]) continue;
    out.add_row(subjects_[r.subject], tasks_[r.task], r.position, levels(i),
                r.outcome);
  }
  return out;
}

bool natural_less(std::string_view a, std::string_view b) {
  const auto numeric = [](std::string_view s) {
    return !s.empty() && s.size() < 19 &&
           std::all_of(s.begin(), s.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
  };
  if (numeric(a) && numeric(b)) {
    long long x = 0;
    long long y = 0;
    std::from_chars(a.data(), a.data() + a.size(), x);
    std::from_chars(b.data(), b.data() + b.size(), y);
    if (x != y) return x < y;
  }
  return a < b;
}

std::vector<TaskView> group_tasks(const ConjointDataset& d) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> index;
  std::vector<TaskView> views;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& r = d.row(i);
    auto [it, inserted] = index.try_emplace({r.subject, r.task}, views.size());
    if (inserted) views.push_back({r.subject, r.task, {}});
    views[it->second].rows.push_back(i);
  }
  for (auto& v : views) {
    std::stable_sort(v.rows.begin(), v.rows.end(), [&](std::size_t a, std::size_t b) {
      return d.row(a).position < d.row(b).position;
    });
  }
  std::sort(views.begin(), views.end(), [&](const TaskView& a, const TaskView& b) {
    if (a.subject != b.subject) {
      return natural_less(d.subject_id(a.subject), d.subject_id(b.subject));
    }
    return natural_less(d.task_id(a.task), d.task_id(b.task));
  });
  return views;
}

std::vector<Violation> validate_dataset(const ConjointDataset& d) {
  std::vector<Violation> out;
  const auto views = group_tasks(d);
  for (const auto& v : views) {
    const auto report = [&](std::string message) {
      out.push_back({d.subject_id(v.subject), d.task_id(v.task), std::move(message)});
    };
    const auto K = static_cast<int>(v.K());
    if (K < 2) {
      report("task has " + std::to_string(K) + " profile(s); at least 2 required");
      continue;
    }
    std::vector<int> positions;
    for (auto i : v.rows) positions.push_back(d.row(i).position);
    // rows are sorted by position
    for (int k = 0; k < K; ++k) {
      if (positions[static_cast<std::size_t>(k)] != k + 1) {
        std::string list;
        for (auto p : positions) list += (list.empty() ? "" : ",") + std::to_string(p);
        report("positions {" + list + "} are not exactly 1.." + std::to_string(K));
        break;
      }
    }
    if (d.mode() == ResponseMode::Ranked) {
      std::vector<int> ranks;
      for (auto i : v.rows) ranks.push_back(d.row(i).outcome);
      std::sort(ranks.begin(), ranks.end());
      for (int k = 0; k < K; ++k) {
        if (ranks[static_cast<std::size_t>(k)] != k + 1) {
          std::string list;
          for (auto i : v.rows) {
            list += (list.empty() ? "" : ",") + std::to_string(d.row(i).outcome);
          }
          report("ranks {" + list + "} are not a permutation of 1.." +
                 std::to_string(K));
          break;
        }
      }
    } else {
      int chosen = 0;
      bool binary = true;
      for (auto i : v.rows) {
        const int y = d.row(i).outcome;
        if (y != 0 && y != 1) binary = false;
        chosen += (y == 1);
      }
      if (!binary) {
        report("choice values must be 0 or 1");
      } else if (chosen != 1) {
        report("expected exactly one chosen profile, found " + std::to_string(chosen));
      }
    }
  }
  return out;
}

namespace {

int parse_int(const std::string& text, const char* column, std::size_t line) {
  int value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw DataError("line " + std::to_string(line) + ": malformed " + column +
                    " value '" + text + "'");
  }
  return value;
}

}  // namespace

ConjointDataset read_dataset_csv(std::istream& in, const AttributeSchema& schema,
                                 ResponseMode mode, LoadOptions options) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) throw DataError("dataset CSV is empty (no header row)");

  const auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header->size(); ++i) {
      if ((*header)[i] == name) return i;
    }
    throw DataError("dataset CSV is missing column '" + std::string(name) + "'");
  };
  const char* outcome_name = mode == ResponseMode::Ranked ? "rank" : "choice";
  const auto subject_col = column("subject");
  const auto task_col = column("task");
  const auto position_col = column("position");
  const auto outcome_col = column(outcome_name);
  std::vector<std::size_t> attribute_cols;
  for (const auto& a : schema.attributes()) attribute_cols.push_back(column(a.name));

  ConjointDataset d(schema, mode);
  std::vector<int> codes(schema.size());
  while (auto record = reader.next()) {
    if (record->size() == 1 && record->front().empty()) continue;
    const auto line = reader.line();
    if (record->size() != header->size()) {
      throw DataError("line " + std::to_string(line) + ": expected " +
                      std::to_string(header->size()) + " fields, found " +
                      std::to_string(record->size()));
    }
    const auto& f = *record;
    for (std::size_t a = 0; a < schema.size(); ++a) {
      const auto& value = f[attribute_cols[a]];
      const int code = schema[a].level_index(value);
      if (code < 0) {
        throw DataError("line " + std::to_string(line) + ": attribute '" +
                        schema[a].name + "' has unknown level '" + value + "'");
      }
      codes[a] = code;
    }
    const int position = parse_int(f[position_col], "position", line);
    const int outcome = parse_int(f[outcome_col], outcome_name, line);
    d.add_row(f[subject_col], f[task_col], position, codes, outcome);
  }

  if (options.invert_ranks && mode == ResponseMode::Ranked) {
    for (const auto& v : group_tasks(d)) {
      const int K = static_cast<int>(v.K());
      for (auto i : v.rows) d.set_outcome(i, K + 1 - d.row(i).outcome);
    }
  }

  const auto violations = validate_dataset(d);
  if (!violations.empty()) {
    std::string message = "dataset has " + std::to_string(violations.size()) +
                          " invalid task(s)";
    const std::size_t shown = std::min<std::size_t>(violations.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      const auto& v = violations[i];
      message += "\n  subject " + v.subject_id + ", task " + v.task_id + ": " +
                 v.message;
    }
    throw DataError(message);
  }
  return d;
}

ConjointDataset load_dataset_csv(const std::filesystem::path& path,
                                 const AttributeSchema& schema, ResponseMode mode,
                                 LoadOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  return read_dataset_csv(in, schema, mode, options);
}

void write_dataset_csv(const ConjointDataset& d, std::ostream& out) {
  std::vector<std::string> fields{"subject", "task", "position",
                                  d.mode() == ResponseMode::Ranked ? "rank" : "choice"};
  for (const auto& a : d.schema().attributes()) fields.push_back(a.name);
  csv::write_record(out, fields);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& r = d.row(i);
    fields.clear();
    fields.push_back(d.subject_id(r.subject));
    fields.push_back(d.task_id(r.task));
    fields.push_back(std::to_string(r.position));
    fields.push_back(std::to_string(r.outcome));
    for (std::size_t a = 0; a < d.schema().size(); ++a) {
      fields.push_back(d.level_name(i, a));
    }
    csv::write_record(out, fields);
  }
}

void write_dataset_csv(const ConjointDataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_dataset_csv(d, out);
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace rankjoint
