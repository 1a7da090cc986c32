#include "point_csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <string>
#include <string_view>

#include "freemesh/error.hpp"

namespace freemesh::cli {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_number(std::string_view field, double& out) {
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), last, out);
  return ec == std::errc{} && ptr == last && !field.empty();
}

}  // namespace

PointTable read_point_csv(std::istream& in, bool with_values) {
  const std::size_t columns = with_values ? 4 : 3;
  PointTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    double parsed[4] = {};
    bool numeric = true;
    for (std::size_t i = 0; i < fields.size() && i < columns; ++i)
      numeric = numeric && parse_number(fields[i], parsed[i]);

    if (first_row && !numeric) {
      first_row = false;
      if (fields.size() < columns) {
        throw FormatError("header has " + std::to_string(fields.size()) + " columns, expected " +
                              std::to_string(columns),
                          line_no);
      }
      continue;
    }
    first_row = false;
    // Query files may carry a value column; it is ignored.
    if (fields.size() != columns && !(!with_values && fields.size() == 4)) {
      throw FormatError("expected " + std::to_string(columns) + " columns, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    if (!numeric) throw FormatError("not a number", line_no);
    for (std::size_t i = 0; i < columns; ++i) {
      if (!std::isfinite(parsed[i])) throw FormatError("non-finite value", line_no);
    }
    table.points.push_back({parsed[0], parsed[1], parsed[2]});
    if (with_values) table.values.push_back(parsed[3]);
  }
  return table;
}

}  // namespace freemesh::cli
