#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mpat::csv {

struct Row {
  std::size_t line = 0;  // 1-based line on which the row starts
  std::vector<std::string> fields;
};

/// Comma-separated, double-quote escaped (RFC 4180). Quoted fields may span lines.
/// Blank lines are skipped. Throws DataError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

std::string escape(std::string_view field);
std::string format_row(const std::vector<std::string>& fields);

}  // namespace mpat::csv
