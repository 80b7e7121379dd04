#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace driftdr::csv {

/// Parse failure carrying the 1-based data row (0 for the header) and column.
class CsvError : public std::runtime_error {
public:
    CsvError(std::size_t row, std::string column, const std::string& what);

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    /// Lines starting with '#' that preceded the header.
    std::vector<std::string> comments;

    /// Index of a named column; throws CsvError if absent.
    std::size_t column(std::string_view name) const;
};

/// RFC-4180 reader: quoted fields, doubled quotes, CRLF tolerated. Leading
/// '#' comment lines are collected, not parsed. Every row must have as many
/// fields as the header.
Table read(std::istream& in);
Table read_file(const std::string& path);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest representation that round-trips through strtod.
std::string format_double(double v);

/// Strict full-field parse; returns false on trailing garbage or empty input.
bool parse_double(std::string_view s, double& out);

}  // namespace driftdr::csv
