#pragma once

// RFC 4180 style CSV: comma separated, double-quote quoting, header row.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace layertime {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, if present.
  std::optional<std::size_t> column(std::string_view name) const;
  // Throws ValidationError when the column is missing.
  std::size_t require_column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Shortest text that parses back to the same double.
std::string format_double(double v);
// Empty cell -> nullopt; anything unparsable throws ValidationError.
std::optional<double> parse_double(std::string_view cell);

}  // namespace layertime
