#include "regimevol/csv.hpp"

#include <cstdlib>
#include <stdexcept>

namespace regimevol::csv {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Table read(const std::string& path, const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path + ": empty file");
    }
    ++line_no;
    auto header = split(line);
    for (auto& h : header) h = trim(h);
    if (header != expected_header) {
        std::string want;
        for (std::size_t i = 0; i < expected_header.size(); ++i) {
            if (i) want += ",";
            want += expected_header[i];
        }
        throw std::runtime_error(path + ": expected header '" + want + "', got '" + trim(line) + "'");
    }
    Table table;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (fields.size() != expected_header.size()) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(expected_header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        }
        for (auto& f : fields) f = trim(f);
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    return table;
}

double parse_double(const std::string& field, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') {
        throw std::runtime_error(context + ": not a number: '" + field + "'");
    }
    return v;
}

Writer::Writer(const std::string& path) : out_(path), path_(path) {
    if (!out_) {
        throw std::runtime_error("cannot open file for writing: " + path);
    }
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void Writer::close() {
    out_.close();
    if (!out_) {
        throw std::runtime_error("error writing file: " + path_);
    }
}

}  // namespace regimevol::csv
