#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "arlb/common.hpp"

namespace arlb {

// Minimal CSV table: header row required, '.' decimal separator, no quoting
// (none of the emitted values contain commas). Floats are formatted as
// shortest round-trip decimals so a write/load/write cycle is byte-stable.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int column_index(const std::string& name) const;            // -1 if absent
    int require_column(const std::string& name) const;          // throws IoError
    const std::string& cell(std::size_t row, int col) const { return rows[row][static_cast<std::size_t>(col)]; }
};

std::string format_double(double value);
double parse_double(const std::string& text);
long parse_long(const std::string& text);

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
void write_csv(const CsvTable& table, const std::filesystem::path& path);  // atomic (tmp + rename)
std::string to_csv_string(const CsvTable& table);

// Atomically writes `content` to `path` via a temp file in the same directory.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace arlb
