#include "sfda/csv.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sfda {

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size())
    throw std::invalid_argument("Table: row width " + std::to_string(row.size()) +
                                " does not match " + std::to_string(columns.size()) +
                                " columns");
  rows.push_back(std::move(row));
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

bool needs_quotes(const std::string& field) {
  return field.find_first_of(",\"\r\n") != std::string::npos;
}

void write_field(const std::string& field, std::ostream& out) {
  if (!needs_quotes(field)) {
    out << field;
    return;
  }
  out << '"';
  for (char c : field) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

void write_row(const std::vector<std::string>& row, std::ostream& out) {
  for (size_t j = 0; j < row.size(); ++j) {
    if (j) out << ',';
    write_field(row[j], out);
  }
  out << '\n';
}

}  // namespace

void write_csv(const Table& table, std::ostream& out) {
  write_row(table.columns, out);
  for (const auto& row : table.rows) write_row(row, out);
}

void write_csv_file(const Table& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_csv(table, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

// Splits one logical CSV record starting at the stream position. Handles
// quoted fields spanning line breaks. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  while (true) {
    if (c == EOF) {
      fields.push_back(std::move(field));
      return true;
    }
    if (quoted) {
      if (c == '"') {
        const int next = in.get();
        if (next == '"') {
          field += '"';
        } else {
          quoted = false;
          c = next;
          continue;
        }
      } else {
        field += static_cast<char>(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else {
      field += static_cast<char>(c);
    }
    c = in.get();
  }
}

}  // namespace

Table read_csv(std::istream& in) {
  Table table;
  std::vector<std::string> fields;
  if (!read_record(in, fields)) throw std::runtime_error("read_csv: empty input");
  table.columns = fields;
  size_t line = 1;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() != table.columns.size())
      throw std::runtime_error("read_csv: row " + std::to_string(line) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(table.columns.size()));
    table.rows.push_back(fields);
  }
  return table;
}

Table read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return read_csv(in);
}

Table trace_table(const SimTrace& trace, LossKind kind) {
  const bool classification = kind == LossKind::Logistic;
  Table t;
  t.columns = {"round", "t", "loss"};
  if (classification) t.columns.push_back("accuracy");
  t.columns.push_back("energy_to_date");
  t.columns.push_back("alpha");
  for (const RoundRecord& r : trace.rounds) {
    std::vector<std::string> row;
    row.push_back(std::to_string(r.round));
    row.push_back(std::to_string(r.tick));
    row.push_back(format_number(r.loss));
    if (classification) row.push_back(format_number(r.accuracy));
    row.push_back(format_number(r.energy_to_date));
    row.push_back(format_number(r.alpha_used));
    t.add_row(std::move(row));
  }
  return t;
}

}
