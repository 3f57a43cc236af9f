#pragma once

// Minimal RFC-4180 reader/writer and shortest round-trip number formatting.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "jointpred/errors.hpp"

namespace jointpred::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

/// Parses RFC-4180 text: quoted fields, doubled quotes, CRLF or LF line ends,
/// embedded newlines inside quotes. A UTF-8 BOM is skipped.
inline Table parse(std::string_view text) {
    Table t;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    std::size_t i = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
        if (!(row.size() == 1 && row[0].empty())) {
            if (t.header.empty() && t.rows.empty() && !row.empty())
                t.header = std::move(row);
            else
                t.rows.push_back(std::move(row));
        }
        row.clear();
    };

    for (; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            if (field_started && !field.empty())
                throw ParseError(line, "", "quote inside unquoted field");
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            field_started = false;
        } else if (c == '\r') {
            // tolerated before \n
        } else if (c == '\n') {
            end_row();
            ++line;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError(line, "", "unterminated quoted field");
    if (field_started || !row.empty()) end_row();

    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (t.rows[r].size() != t.header.size())
            throw ParseError(r + 2, "", "expected " + std::to_string(t.header.size()) +
                                            " fields, got " + std::to_string(t.rows[r].size()));
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

inline std::string quote(std::string_view field) {
    bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) v = 0.0;  // drop negative zero
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_cell(const std::optional<double>& v) {
    return v ? format_number(*v) : std::string();
}

/// Parses a numeric cell. Empty cells and the literal "NA" are missing.
inline std::optional<double> parse_cell(std::string_view s, std::size_t row,
                                        const std::string& column) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty() || s == "NA") return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ParseError(row, column, "not a number: '" + std::string(s) + "'");
    if (!std::isfinite(v)) throw ParseError(row, column, "non-finite value");
    return v;
}

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << quote(fields[i]);
        }
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

inline void write_file(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    Writer w(out);
    w.row(header);
    for (const auto& r : rows) w.row(r);
}

}  // namespace jointpred::csv
