#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mfagl/error.hpp"

namespace mfagl::csv {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw NumericError("cannot format double");
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view field, const std::string& context) {
    double value = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty())
        throw IoError(context + ": cannot parse number '" + std::string(field) + "'");
    return value;
}

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    return line;
}

/// A parsed CSV file: the header row and the data rows, all with the
/// header's arity. `read` checks the header verbatim against `expected` (or
/// `alt_expected`, for files with an optional last column); an empty
/// `expected` accepts any header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    static Table read(const std::string& path, const std::vector<std::string>& expected,
                      const std::vector<std::string>& alt_expected = {}) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        Table table;
        std::string line;
        std::size_t lineno = 0;
        std::size_t arity = 0;
        bool have_header = false;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto fields = split_line(line);
            if (!have_header) {
                have_header = true;
                if (!expected.empty() && fields != expected &&
                    (alt_expected.empty() || fields != alt_expected))
                    throw IoError(path + ": unexpected header '" + line + "', expected '" +
                                  join(expected) + "'");
                arity = fields.size();
                table.header = std::move(fields);
                continue;
            }
            if (fields.size() != arity)
                throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(arity) + " fields, got " +
                              std::to_string(fields.size()));
            table.rows.push_back(std::move(fields));
        }
        if (!have_header) throw IoError(path + ": empty file, missing header");
        return table;
    }
};

/// Line-oriented CSV writer with a fixed header.
class Writer {
public:
    Writer(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw IoError("cannot write " + path);
        path_ = path;
        arity_ = header.size();
        out_ << join(header) << '\n';
    }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != arity_)
            throw InvalidArgument(path_ + ": row arity " + std::to_string(fields.size()) +
                                  " does not match header arity " + std::to_string(arity_));
        out_ << join(fields) << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("error writing " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
    std::size_t arity_;
};

} // namespace mfagl::csv
