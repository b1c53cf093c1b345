#include "rankjoint/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "rankjoint/error.hpp"

namespace rankjoint {

using nlohmann::json;

int Attribute::level_index(std::string_view level) const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return static_cast<int>(i);
  }
  return -1;
}

bool operator==(const Attribute& a, const Attribute& b) {
  return a.name == b.name && a.levels == b.levels && a.baseline == b.baseline;
}

bool operator==(const AttributeSchema& a, const AttributeSchema& b) {
  return a.attributes_ == b.attributes_;
}

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes)
    : attributes_(std::move(attributes)) {
  std::set<std::string> names;
  for (const auto& a : attributes_) {
    if (a.name.empty()) throw DataError("schema: attribute with empty name");
    if (!names.insert(a.name).second) {
      throw DataError("schema: duplicate attribute name '" + a.name + "'");
    }
    std::set<std::string> seen;
    for (const auto& level : a.levels) {
      if (!seen.insert(level).second) {
        throw DataError("schema: attribute '" + a.name +
                        "' lists level '" + level + "' twice");
      }
    }
    if (a.levels.size() < 2) {
      throw DataError("schema: attribute '" + a.name +
                      "' needs at least two levels");
    }
    if (a.baseline >= a.levels.size()) {
      throw DataError("schema: attribute '" + a.name +
                      "' has an out-of-range baseline");
    }
  }
}

AttributeSchema AttributeSchema::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("schema: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("attributes") ||
      !doc["attributes"].is_array()) {
    throw DataError("schema: expected an object with an 'attributes' array");
  }
  std::vector<Attribute> attributes;
  for (const auto& item : doc["attributes"]) {
    if (!item.is_object() || !item.contains("name") ||
        !item["name"].is_string() || !item.contains("levels") ||
        !item["levels"].is_array()) {
      throw DataError("schema: each attribute needs 'name' and 'levels'");
    }
    Attribute a;
    a.name = item["name"].get<std::string>();
    for (const auto& level : item["levels"]) {
      if (!level.is_string()) {
        throw DataError("schema: levels of '" + a.name + "' must be strings");
      }
      a.levels.push_back(level.get<std::string>());
    }
    if (item.contains("baseline") && !item["baseline"].is_null()) {
      if (!item["baseline"].is_string()) {
        throw DataError("schema: baseline of '" + a.name + "' must be a string");
      }
      const auto baseline = item["baseline"].get<std::string>();
      const int idx = a.level_index(baseline);
      if (idx < 0) {
        throw DataError("schema: baseline '" + baseline +
                        "' is not a level of '" + a.name + "'");
      }
      a.baseline = static_cast<std::size_t>(idx);
    }
    attributes.push_back(std::move(a));
  }
  return AttributeSchema(std::move(attributes));
}

AttributeSchema AttributeSchema::load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open schema file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

AttributeSchema AttributeSchema::binary(std::size_t n) {
  std::vector<Attribute> attributes;
  attributes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    attributes.push_back({"A" + std::to_string(i + 1), {"0", "1"}, 0});
  }
  return AttributeSchema(std::move(attributes));
}

std::string AttributeSchema::to_json() const {
  json doc;
  doc["attributes"] = json::array();
  for (const auto& a : attributes_) {
    doc["attributes"].push_back(
        {{"name", a.name}, {"levels", a.levels}, {"baseline", a.baseline_level()}});
  }
  return doc.dump();
}

int AttributeSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t AttributeSchema::num_effects() const {
  std::size_t n = 0;
  for (const auto& a : attributes_) n += a.levels.size() - 1;
  return n;
}

}  // namespace rankjoint
