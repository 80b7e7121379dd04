#include "driftdr/csv.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

namespace driftdr::csv {

CsvError::CsvError(std::size_t row, std::string column, const std::string& what)
    : std::runtime_error(what), row_(row), column_(std::move(column)) {}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return j;
    }
    throw CsvError(0, std::string(name), "missing column '" + std::string(name) + "'");
}

namespace {

// Reads one logical record; returns false at EOF with nothing read.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t row) {
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    bool field_was_quoted = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty() || field_was_quoted) {
                throw CsvError(row, "", "row " + std::to_string(row) + ": stray quote inside unquoted field");
            }
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get(c);
            break;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw CsvError(row, "", "row " + std::to_string(row) + ": unterminated quoted field");
    }
    if (!any) return false;
    fields.push_back(std::move(field));
    return true;
}

}  // namespace

Table read(std::istream& in) {
    Table t;
    while (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        t.comments.push_back(line);
    }
    if (!read_record(in, t.header, 0)) {
        throw CsvError(0, "", "empty file: header row required");
    }
    std::vector<std::string> fields;
    std::size_t row = 1;
    while (read_record(in, fields, row)) {
        if (fields.size() == 1 && fields[0].empty()) {
            // blank line
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw CsvError(row, "",
                           "row " + std::to_string(row) + ": expected " + std::to_string(t.header.size()) +
                               " fields, found " + std::to_string(fields.size()));
        }
        t.rows.push_back(fields);
        ++row;
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return read(in);
}

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t j = 0; j < fields.size(); ++j) {
        if (j) out << ',';
        out << quote(fields[j]);
    }
    out << '\n';
}

std::string format_double(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace driftdr::csv
