#include "disfle/csv.hpp"

#include "disfle/errors.hpp"

#include <sstream>

namespace disfle {
namespace csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(field);
    return out;
}

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

Table read_stream(std::istream& in) {
    Table table;
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty() || line[0] == '#') continue;
        if (!have_header) {
            table.header = split_line(line);
            have_header = true;
            continue;
        }
        table.rows.push_back(Row{line_number, split_line(line)});
    }
    if (!have_header) throw DataError("CSV input has no header row");
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    try {
        return read_stream(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string format_double(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

Writer::Writer(const std::string& path) : out_(path) {
    if (!out_) throw DataError("cannot open file for writing: " + path);
}

Writer::~Writer() = default;

void Writer::comment(const std::string& text) { out_ << "# " << text << "\n"; }

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << "\n";
}

void Writer::flush() { out_.flush(); }

} // namespace csv
} // namespace disfle
