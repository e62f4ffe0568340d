#include "jmacate/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace jmacate {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Err::CsvInvalid, "cannot open CSV file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) fail(Err::CsvInvalid, "empty CSV file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);

    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            try {
                size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                fail(Err::CsvInvalid, path + ":" + std::to_string(lineno) +
                                          ": non-numeric cell \"" + cell + "\"");
            }
        }
        if (row.size() != table.header.size())
            fail(Err::CsvInvalid,
                 path + ":" + std::to_string(lineno) + ": wrong number of fields");
        table.rows.push_back(std::move(row));
    }
    if (table.rows.empty()) fail(Err::CsvInvalid, "CSV has no data rows: " + path);
    return table;
}

Dataset dataset_from_csv(const std::string& path) {
    const CsvTable table = read_csv(path);
    const int yc = table.col("y");
    if (yc < 0) fail(Err::CsvInvalid, path + ": missing required column \"y\"");
    const int tc = table.col("t");
    if (tc < 0) fail(Err::CsvInvalid, path + ": missing required column \"t\"");

    std::vector<int> ucols;
    for (int p = 1;; ++p) {
        const int c = table.col("u" + std::to_string(p));
        if (c < 0) break;
        ucols.push_back(c);
    }
    if (ucols.empty()) fail(Err::CsvInvalid, path + ": missing covariate columns u1..up");

    Dataset data;
    const int n = static_cast<int>(table.rows.size());
    data.x.resize(n, static_cast<int>(ucols.size()));
    data.t.resize(n);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        data.y(i) = row[yc];
        const double tv = row[tc];
        if (tv != 0.0 && tv != 1.0)
            fail(Err::CsvInvalid, path + ": column \"t\" must be 0/1, got " + format_double(tv));
        data.t[i] = static_cast<int>(tv);
        for (size_t d = 0; d < ucols.size(); ++d) data.x(i, static_cast<int>(d)) = row[ucols[d]];
    }
    return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(Err::CsvInvalid, "cannot write CSV file: " + path);
    out << "y,t";
    for (int d = 0; d < data.p(); ++d) out << ",u" << (d + 1);
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
        out << format_double(data.y(i)) << "," << data.t[i];
        for (int d = 0; d < data.p(); ++d) out << "," << format_double(data.x(i, d));
        out << "\n";
    }
}

}  // namespace jmacate
