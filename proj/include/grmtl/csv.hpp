#pragma once

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grmtl::csv {

using Row = std::vector<std::string>;

// Splits one line on commas. Double-quoted fields may contain commas and
// doubled quotes. Surrounding whitespace and a trailing '\r' are stripped.
Row split_line(std::string_view line);

// Reads all non-blank lines. Each row remembers its 1-based line number.
struct Table {
    std::vector<Row> rows;
    std::vector<std::size_t> line_numbers;
};

Table read(std::istream& in);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

// Strict parse: the whole cell must be a finite real number.
std::optional<double> parse_real(std::string_view cell);

// Shortest text of `value` that parses back to the same double (max 17 digits).
std::string format_real(double value);

std::string join(const Row& fields);

} // namespace grmtl::csv
