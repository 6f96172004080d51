#include "capire/csv.hpp"

#include "capire/common.hpp"

#include <fstream>
#include <sstream>

namespace capire::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int Table::require_column(const std::string& name) const {
    const int idx = column(name);
    if (idx < 0) throw IngestError("missing required column '" + name + "'");
    return idx;
}

Table read(std::istream& in, const std::string& origin) {
    Table table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool record_started = false;
    std::size_t line = 1;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (table.header.empty()) {
            table.header = record;
        } else {
            if (record.size() != table.header.size()) {
                throw IngestError(origin + ":" + std::to_string(line) +
                                  ": expected " + std::to_string(table.header.size()) +
                                  " fields, got " + std::to_string(record.size()));
            }
            table.rows.push_back(record);
        }
        record.clear();
        record_started = false;
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
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
                if (field_started && !field.empty()) {
                    throw IngestError(origin + ":" + std::to_string(line) +
                                      ": quote inside unquoted field");
                }
                in_quotes = true;
                field_started = true;
                record_started = true;
                break;
            case ',':
                end_field();
                record_started = true;
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                if (record_started || field_started || !record.empty()) end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
                record_started = true;
        }
    }
    if (in_quotes) throw IngestError(origin + ": unterminated quoted field");
    if (record_started || !record.empty()) end_record();
    if (table.header.empty()) throw IngestError(origin + ": empty file, no header row");
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open '" + path + "'");
    return read(in, path);
}

std::string escape(const std::string& field) {
    bool needs_quotes = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quotes = true;
            break;
        }
    }
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

void write(std::ostream& out, const Table& table) {
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << escape(row[i]);
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestError("cannot write '" + path + "'");
    write(out, table);
}

}  // namespace capire::csv
