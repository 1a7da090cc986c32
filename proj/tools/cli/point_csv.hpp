#pragma once

#include <iosfwd>
#include <vector>

#include "freemesh/multiindex.hpp"

namespace freemesh::cli {

struct PointTable {
  std::vector<Point3> points;
  std::vector<double> values;  // empty unless values were requested
};

// Comma-separated rows of x1,x2,x3 (and f when with_values). One optional
// header line is skipped; blank lines are ignored. Throws FormatError with
// the 1-based line number on a bad row.
PointTable read_point_csv(std::istream& in, bool with_values);

}  // namespace freemesh::cli
