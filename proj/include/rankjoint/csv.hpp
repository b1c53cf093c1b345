#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace rankjoint::csv {

// RFC 4180-style reader: comma separated, double-quoted fields may contain
// commas, quotes ("") and line breaks. CRLF and a leading UTF-8 BOM are
// accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws DataError on an
  // unterminated quoted field.
  std::optional<std::vector<std::string>> next();

  // Physical line on which the most recently returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
  bool first_ = true;
};

std::string escape(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rankjoint::csv
