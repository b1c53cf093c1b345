#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rankjoint {

/// A randomized profile dimension with its ordered levels. Levels are
/// categorical strings; the baseline level gets no dummy column.
struct Attribute {
  std::string name;
  std::vector<std::string> levels;
  std::size_t baseline = 0;

  /// Index of `level`, or -1 when it is not a level of this attribute.
  int level_index(std::string_view level) const;
  const std::string& baseline_level() const { return levels[baseline]; }
};

/// Ordered attribute list. Construction validates that every attribute has at
/// least two distinct levels, names are unique and baselines are members.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<Attribute> attributes);

  /// Parses `{"attributes":[{"name":..,"levels":[..],"baseline":..}]}`.
  /// `baseline` may be omitted, in which case the first level is used.
  static AttributeSchema from_json(std::string_view text);
  static AttributeSchema load_json(const std::filesystem::path& path);

  /// `n` binary attributes named A1..An with levels "0" (baseline) and "1".
  static AttributeSchema binary(std::size_t n);

  std::string to_json() const;

  const std::vector<Attribute>& attributes() const { return attributes_; }
  const Attribute& operator[](std::size_t i) const { return attributes_[i]; }
  std::size_t size() const { return attributes_.size(); }
  bool empty() const { return attributes_.empty(); }

  /// Index of the attribute called `name`, or -1.
  int find(std::string_view name) const;

  /// Number of non-baseline levels across all attributes.
  std::size_t num_effects() const;

  friend bool operator==(const AttributeSchema&, const AttributeSchema&);

 private:
  std::vector<Attribute> attributes_;
};

bool operator==(const Attribute& a, const Attribute& b);

}  // namespace rankjoint
