#include "deepkernel/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "deepkernel/errors.hpp"

namespace dk {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_csv_table(const CsvTable& table, std::ostream& out,
                     const std::vector<std::string>& comments) {
    for (const std::string& c : comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
}

std::string to_csv(const CsvTable& table, const std::vector<std::string>& comments) {
    std::ostringstream ss;
    write_csv_table(table, ss, comments);
    return ss.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding whitespace
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        fields.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw validation_error("CSV line " + std::to_string(line_no) +
                               ": '" + s + "' is not a number");
    }
    return v;
}

}  // namespace

CsvTable read_csv_table(std::istream& in) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.empty()) continue;
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw validation_error("CSV line " + std::to_string(line_no) +
                                   ": expected " + std::to_string(table.header.size()) +
                                   " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (table.header.empty()) throw validation_error("CSV has no header row");
    return table;
}

void write_dataset_csv(const Dataset& data, std::ostream& out,
                       const std::vector<std::string>& comments) {
    validate(data);
    CsvTable table;
    const Eigen::Index d = data.X.cols();
    if (!data.names.empty()) {
        table.header = data.names;
    } else {
        for (Eigen::Index i = 0; i < d; ++i) table.header.push_back("x" + std::to_string(i + 1));
        table.header.push_back("y");
    }
    table.rows.reserve(static_cast<std::size_t>(data.X.rows()));
    for (Eigen::Index r = 0; r < data.X.rows(); ++r) {
        std::vector<std::string> row;
        row.reserve(static_cast<std::size_t>(d) + 1);
        for (Eigen::Index c = 0; c < d; ++c) row.push_back(format_double(data.X(r, c)));
        row.push_back(format_double(data.y[r]));
        table.rows.push_back(std::move(row));
    }
    write_csv_table(table, out, comments);
}

void write_dataset_csv_file(const Dataset& data, const std::string& path,
                            const std::vector<std::string>& comments) {
    std::ofstream out(path);
    if (!out) throw invalid_argument_error("cannot open '" + path + "' for writing");
    write_dataset_csv(data, out, comments);
}

Dataset dataset_from_table(const CsvTable& table) {
    if (table.header.size() < 2) {
        throw validation_error("dataset CSV needs at least one input column and a target");
    }
    if (table.rows.empty()) throw validation_error("dataset CSV has no data rows");
    Dataset data;
    const std::size_t d = table.header.size() - 1;
    data.names = table.header;
    data.X.resize(static_cast<Eigen::Index>(table.rows.size()), static_cast<Eigen::Index>(d));
    data.y.resize(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c <= d; ++c) {
            const double v = parse_double(table.rows[r][c], r + 1);
            if (c < d) {
                data.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
            } else {
                data.y[static_cast<Eigen::Index>(r)] = v;
            }
        }
    }
    validate(data);
    return data;
}

Dataset read_dataset_csv(std::istream& in) { return dataset_from_table(read_csv_table(in)); }

Dataset read_dataset_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_argument_error("cannot open dataset '" + path + "'");
    return read_dataset_csv(in);
}

}  // namespace dk
