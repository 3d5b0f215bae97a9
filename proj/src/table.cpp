#include "ratchet/table.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace ratchet {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string format_cell(const Cell& cell, const Column& column) {
  auto mismatch = [&]() { return TableError("cell type does not match column '" + column.name + "'"); };
  switch (column.type) {
    case ColumnType::real:
      if (const auto* v = std::get_if<double>(&cell)) return format_real(*v);
      throw mismatch();
    case ColumnType::integer:
      if (const auto* v = std::get_if<std::int64_t>(&cell)) return std::to_string(*v);
      throw mismatch();
    case ColumnType::text:
      if (const auto* v = std::get_if<std::string>(&cell)) return csv_field(*v);
      throw mismatch();
    case ColumnType::boolean:
      if (const auto* v = std::get_if<bool>(&cell)) return *v ? "true" : "false";
      throw mismatch();
  }
  throw mismatch();
}

std::string header_line(const Schema& schema) {
  std::string line;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) line += ',';
    line += csv_field(schema[i].name);
  }
  return line;
}

// Splits one record starting at pos; advances pos past its line end.
std::vector<std::string> parse_record(const std::string& text, std::size_t& pos) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace

TableWriter::TableWriter(const std::string& path, Schema schema, bool append) : path_(path), schema_(std::move(schema)) {
  if (schema_.empty()) throw TableError("table schema is empty");
  bool write_header = true;
  if (append) {
    std::ifstream in(path, std::ios::binary);
    if (in) {
      std::string first;
      std::getline(in, first);
      if (!first.empty()) {
        if (first != header_line(schema_)) throw TableError(path + ": existing header does not match the schema");
        write_header = false;
      }
    }
  }
  out_.open(path, append ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
  if (!out_) throw TableError(path + ": cannot open for writing");
  if (write_header) {
    out_ << header_line(schema_) << '\n';
    out_.flush();
  }
  if (!out_) throw TableError(path + ": write failed");
}

void TableWriter::write(const Row& row) {
  if (row.size() != schema_.size()) throw TableError(path_ + ": row has the wrong number of cells");
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += format_cell(row[i], schema_[i]);
  }
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw TableError(path_ + ": write failed");
}

void emit_table(const std::vector<Row>& rows, const Schema& schema, const std::string& path) {
  TableWriter writer(path, schema);
  for (const auto& row : rows) writer.write(row);
}

CsvData read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TableError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  CsvData data;
  std::size_t pos = 0;
  if (text.empty()) throw TableError(path + ": empty file");
  data.header = parse_record(text, pos);
  while (pos < text.size()) data.records.push_back(parse_record(text, pos));
  return data;
}

}  // namespace ratchet
