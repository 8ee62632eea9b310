#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sfda/simulator.hpp"

namespace sfda {

// Rectangular string table with a header. All experiment and trace output
// funnels through this so every file gets the same quoting and number format.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  // Appends a row; throws if the width does not match the header.
  void add_row(std::vector<std::string> row);
};

// Shortest-round-trip decimal form: printf %.17g. Every finite double can be
// recovered exactly from the result.
std::string format_number(double v);

// RFC-4180 quoting: fields containing a comma, quote, or line break are
// wrapped in quotes with embedded quotes doubled. Rows end with '\n'.
void write_csv(const Table& table, std::ostream& out);
void write_csv_file(const Table& table, const std::string& path);

// Inverse of write_csv, including quoted fields. Throws on ragged rows.
Table read_csv(std::istream& in);
Table read_csv_file(const std::string& path);

// Per-round trace view: round, t, loss, accuracy (classification runs only),
// energy to date, combiner weight.
Table trace_table(const SimTrace& trace, LossKind kind);

}
