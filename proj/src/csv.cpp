#include "rankjoint/csv.hpp"

#include "rankjoint/error.hpp"

namespace rankjoint::csv {

std::optional<std::vector<std::string>> Reader::next() {
  int c = in_.get();
  if (first_) {
    first_ = false;
    // UTF-8 byte order mark
    if (c == 0xEF) {
      if (in_.get() != 0xBB || in_.get() != 0xBF) {
        throw DataError("csv: malformed byte order mark");
      }
      c = in_.get();
    }
  }
  if (c == std::char_traits<char>::eof()) return std::nullopt;

  record_line_ = line_;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool field_was_quoted = false;

  for (;; c = in_.get()) {
    if (c == std::char_traits<char>::eof()) {
      if (quoted) {
        throw DataError("csv: unterminated quoted field starting on line " +
                        std::to_string(record_line_));
      }
      fields.push_back(std::move(field));
      return fields;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line_;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field.empty() && !field_was_quoted) {
          quoted = true;
          field_was_quoted = true;
        } else {
          field.push_back(ch);
        }
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
        break;
      case '\r':
        if (in_.peek() == '\n') break;
        field.push_back(ch);
        break;
      case '\n':
        ++line_;
        fields.push_back(std::move(field));
        return fields;
      default:
        field.push_back(ch);
    }
  }
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

void write_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.put(',');
    out << escape(fields[i]);
  }
  out.put('\n');
}

}  // namespace rankjoint::csv
