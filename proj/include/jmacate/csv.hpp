#pragma once

#include "jmacate/types.hpp"

#include <string>
#include <vector>

namespace jmacate {

// Round-trip-exact double formatting for deterministic output files.
std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const;  // -1 when absent
};

// Comma-separated, header row, numeric body. Errors: CsvInvalid.
CsvTable read_csv(const std::string& path);

// Columns y, t (0/1) and u1..up in any order. Errors: CsvInvalid naming the
// missing column.
Dataset dataset_from_csv(const std::string& path);

void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace jmacate
