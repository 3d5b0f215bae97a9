#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace ratchet {

enum class ColumnType { real, integer, text, boolean };

struct Column {
  std::string name;
  ColumnType type = ColumnType::real;
};

using Schema = std::vector<Column>;
using Cell = std::variant<double, std::int64_t, std::string, bool>;
using Row = std::vector<Cell>;

class TableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest-round-trip is not guaranteed by %g, so reals use 17 significant digits.
std::string format_real(double v);
// RFC 4180: quote when the field has a comma, quote, CR or LF; double inner quotes.
std::string csv_field(const std::string& s);

// Incremental CSV writer: header on open, one flushed line per row.
class TableWriter {
 public:
  // append = true keeps existing rows (the header must match) for resumed runs.
  TableWriter(const std::string& path, Schema schema, bool append = false);
  void write(const Row& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  Schema schema_;
  std::ofstream out_;
};

void emit_table(const std::vector<Row>& rows, const Schema& schema, const std::string& path);

// Parsed CSV: header then records, fields unquoted.
struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> records;
};
CsvData read_csv(const std::string& path);

}  // namespace ratchet
