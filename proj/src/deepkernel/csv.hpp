#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "deepkernel/gp.hpp"

namespace dk {

// Shortest decimal string that round-trips to the same double. All CSV and
// JSON output goes through this so repeated runs are byte-identical.
std::string format_double(double v);

// One CSV dialect for everything the library emits: optional leading '#'
// comment lines, a header row, comma-separated fields, no quoting. The table
// layer is the shared front end; dataset semantics sit on top of it.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each row matches header size
};

void write_csv_table(const CsvTable& table, std::ostream& out,
                     const std::vector<std::string>& comments = {});
std::string to_csv(const CsvTable& table, const std::vector<std::string>& comments = {});

// Throws validation_error on ragged rows or a missing header.
CsvTable read_csv_table(std::istream& in);

// Dataset CSV: a table whose fields are all numeric; the last column is the
// regression target, the preceding ones the input dimensions.
void write_dataset_csv(const Dataset& data, std::ostream& out,
                       const std::vector<std::string>& comments = {});
void write_dataset_csv_file(const Dataset& data, const std::string& path,
                            const std::vector<std::string>& comments = {});

Dataset dataset_from_table(const CsvTable& table);
Dataset read_dataset_csv(std::istream& in);
// Throws invalid_argument_error if the file cannot be opened and
// validation_error if the contents do not parse.
Dataset read_dataset_csv_file(const std::string& path);

}  // namespace dk
