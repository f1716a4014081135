#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace regimevol::csv {

// Splits one CSV line on commas. No quoting support: none of the formats this
// engine reads or writes ever quote fields.
std::vector<std::string> split(const std::string& line);

std::string trim(const std::string& s);

// Reads all rows of a headered CSV. Verifies the header matches `expected`
// (case-sensitive, after trimming). Throws std::runtime_error naming the file
// and line on any problem.
struct Table {
    std::vector<std::vector<std::string>> rows;  // header excluded
    std::vector<std::size_t> line_numbers;       // 1-based source line per row
};
Table read(const std::string& path, const std::vector<std::string>& expected_header);

double parse_double(const std::string& field, const std::string& context);

// Round-trip-exact float formatting; keeps rerun outputs byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class Writer {
public:
    explicit Writer(const std::string& path);
    void row(const std::vector<std::string>& fields);
    void close();

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace regimevol::csv
