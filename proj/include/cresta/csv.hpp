#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cresta/error.hpp"

namespace cresta::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;  // 1-based source line of each row
};

// Comma-separated, optional double-quote quoting ("" escapes a quote),
// UTF-8 passthrough, LF or CRLF endings. Quoted fields may span lines.
inline Table parse(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<int> lines;

    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool record_has_content = false;
    int line = 1;
    int record_start_line = 1;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        lines.push_back(record_start_line);
        record.clear();
        record_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
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
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw Error(Errc::malformed_csv,
                                "stray quote at line " + std::to_string(line));
                in_quotes = true;
                field_was_quoted = true;
                record_has_content = true;
                break;
            case ',':
                end_field();
                record_has_content = true;
                break;
            case '\r':
                break;  // swallowed; the following \n ends the record
            case '\n':
                if (record_has_content || !field.empty() || !record.empty()) end_record();
                ++line;
                record_start_line = line;
                break;
            default:
                field.push_back(c);
                record_has_content = true;
                break;
        }
    }
    if (in_quotes) throw Error(Errc::malformed_csv, "unterminated quote at end of input");
    if (record_has_content || !field.empty() || !record.empty()) end_record();

    if (records.empty()) throw Error(Errc::malformed_csv, "empty CSV: no header row");

    Table t;
    t.header = std::move(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != t.header.size())
            throw Error(Errc::malformed_csv,
                        "line " + std::to_string(lines[i]) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(records[i].size()));
        t.rows.push_back(std::move(records[i]));
        t.line_numbers.push_back(lines[i]);
    }
    return t;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
    return std::string(s.substr(b, e - b));
}

// Quote a field only when it needs quoting.
inline std::string escape(std::string_view s) {
    bool needs = false;
    for (char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') needs = true;
    if (!needs) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

}  // namespace cresta::csv
