#pragma once

// Minimal RFC-4180 CSV reading/writing. Quoted fields may contain commas,
// doubled quotes and newlines. Lines starting with '#' before the header are
// treated as comments (pipeline outputs carry a provenance comment line).

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ch/error.hpp"

namespace ch {

namespace csv {

struct Row {
    std::vector<std::string> fields;
    std::size_t line = 0; // 1-based line number of the row's first physical line
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw_error(ErrorKind::io, "cannot open " + path);
    }

    const std::string& path() const { return path_; }

    // Reads one record; handles quoted fields spanning physical lines.
    std::optional<Row> next() {
        int c = in_.get();
        while (c == '\n' || c == '#') { // blank lines and comment lines
            if (c == '#') {
                while (c != '\n' && c != EOF) c = in_.get();
                if (c == EOF) return std::nullopt;
            }
            ++line_;
            c = in_.get();
        }
        if (c == EOF) return std::nullopt;

        Row row;
        ++line_;
        row.line = line_;
        std::string field;
        bool quoted = false;
        while (true) {
            if (quoted) {
                if (c == EOF) {
                    throw_error(ErrorKind::data, path_ + ":" + std::to_string(row.line) +
                                                     ": unterminated quoted field");
                } else if (c == '"') {
                    int peek = in_.get();
                    if (peek == '"') {
                        field.push_back('"');
                    } else {
                        quoted = false;
                        in_.unget();
                    }
                } else {
                    if (c == '\n') ++line_;
                    field.push_back(static_cast<char>(c));
                }
            } else {
                if (c == '"' && field.empty()) {
                    quoted = true;
                } else if (c == ',') {
                    row.fields.push_back(std::move(field));
                    field.clear();
                } else if (c == '\r') {
                    // swallow; newline (or EOF) finishes the record
                } else if (c == '\n' || c == EOF) {
                    row.fields.push_back(std::move(field));
                    return row;
                } else {
                    field.push_back(static_cast<char>(c));
                }
            }
            c = in_.get();
        }
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

inline bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        if (needs_quoting(fields[i])) {
            out << '"';
            for (char c : fields[i]) {
                if (c == '"') out << '"';
                out << c;
            }
            out << '"';
        } else {
            out << fields[i];
        }
    }
    out << '\n';
}

} // namespace csv

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& where) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last || text.empty()) {
        throw_error(ErrorKind::data, where + ": not a number: '" + text + "'");
    }
    return value;
}

inline std::int64_t parse_int(const std::string& text, const std::string& where) {
    std::int64_t value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) {
        throw_error(ErrorKind::data, where + ": not an integer: '" + text + "'");
    }
    return value;
}

} // namespace ch
