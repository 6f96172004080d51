#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace capire::csv {

// A parsed delimited file: header row plus string cells. The empty string is
// the missing-value convention throughout the pipeline.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;        // -1 when absent
    int require_column(const std::string& name) const; // throws IngestError
};

// RFC 4180: quoted fields, doubled quotes, commas/newlines inside quotes.
// Structural problems (unbalanced quote, inconsistent field count) raise
// IngestError.
Table read(std::istream& in, const std::string& origin = "<stream>");
Table read_file(const std::string& path);

std::string escape(const std::string& field);
void write(std::ostream& out, const Table& table);
void write_file(const std::string& path, const Table& table);

}  // namespace capire::csv
