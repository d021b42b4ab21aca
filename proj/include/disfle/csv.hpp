#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

namespace disfle {

/// Minimal CSV support: comma separator, no quoting (the formats declared by
/// this project never need embedded commas), '#' lines skipped as comments.
namespace csv {

std::vector<std::string> split_line(const std::string& line);

struct Row {
    std::size_t line_number = 0; // 1-based, physical line in the file
    std::vector<std::string> fields;
};

/// Reads all rows of a stream. The first non-comment row is the header.
/// Throws DataError if the stream has no header row.
struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of a header column, -1 if missing.
    int column(const std::string& name) const;
};

Table read_stream(std::istream& in);
Table read_file(const std::string& path);

/// Deterministic float formatting for CSV emission: shortest representation
/// with up to `digits` significant digits ("%.*g").
std::string format_double(double v, int digits = 10);

class Writer {
public:
    explicit Writer(const std::string& path);
    ~Writer();

    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void comment(const std::string& text);
    void row(const std::vector<std::string>& fields);
    void flush();

private:
    std::ofstream out_;
};

} // namespace csv
} // namespace disfle
