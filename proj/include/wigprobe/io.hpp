#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wigprobe/patterns.hpp"
#include "wigprobe/tmd.hpp"

namespace wigprobe {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Whole-file read; throws DataError naming the path when it cannot be opened.
std::string read_text(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory, then renames, creating
/// parent directories. Throws DataError on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Click record as CSV: header "pattern_hex,count", rows sorted by pattern.
std::string record_to_csv(const ClickRecord& rec);

/// Inverse of record_to_csv. `name` prefixes error messages, which also carry
/// the 1-based line number. Shots are the sum of the counts.
ClickRecord record_from_csv(const std::string& text, const std::string& name);

/// One probe as CSV: header "amp_s,amp_i,mode,pattern_hex,frequency", one row
/// per pattern of each mode (mode 0 signal, 1 idler).
std::string probe_to_csv(const Probe& probe);

/// Inverse of probe_to_csv for a detector with the given bins per mode.
Probe probe_from_csv(const std::string& text, const std::string& name, int bins_s, int bins_i, std::uint64_t shots);

/// Minimal comma splitter for the unquoted numeric tables written here.
std::vector<std::string> split_csv_line(const std::string& line);

/// Parsed table with a header row. Throws DataError naming the file when a
/// required column is missing or a row has the wrong width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
  std::string source;
};
CsvTable parse_csv(const std::string& text, const std::string& name, const std::vector<std::string>& required = {});

/// Shortest decimal text that round-trips a double.
std::string fmt(double v);

}  // namespace wigprobe
