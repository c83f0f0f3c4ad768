#include "ckr/sampletable.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ckr/util.hpp"

namespace ckr {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::size_t SampleTable::col(const std::string& name) const {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j] == name) return j;
    throw UsageError("table: missing column '" + name + "'");
}

bool SampleTable::has_col(const std::string& name) const {
    for (const auto& c : columns)
        if (c == name) return true;
    return false;
}

Vec SampleTable::column(const std::string& name) const {
    const std::size_t j = col(name);
    Vec out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = data(i, j);
    return out;
}

void SampleTable::set_column(const std::string& name, const Vec& values) {
    const std::size_t j = col(name);
    if (values.size() != rows()) throw UsageError("table: column length mismatch");
    for (std::size_t i = 0; i < rows(); ++i) data(i, j) = values[i];
}

Matrix SampleTable::column_group(const std::string& prefix) const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 1;; ++k) {
        const std::string name = prefix + "_" + std::to_string(k);
        bool found = false;
        for (std::size_t j = 0; j < columns.size(); ++j)
            if (columns[j] == name) {
                idx.push_back(j);
                found = true;
                break;
            }
        if (!found) break;
    }
    if (idx.empty()) throw UsageError("table: no columns with prefix '" + prefix + "'");
    Matrix out(rows(), idx.size());
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t k = 0; k < idx.size(); ++k) out(i, k) = data(i, idx[k]);
    return out;
}

void SampleTable::write(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw UsageError("table: cannot open '" + path + "' for writing");
    for (std::size_t j = 0; j < columns.size(); ++j)
        os << (j ? "\t" : "") << columns[j];
    os << "\n";
    for (std::size_t i = 0; i < rows(); ++i) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            os << (j ? "\t" : "") << format_double(data(i, j));
        os << "\n";
    }
    if (!os) throw UsageError("table: write to '" + path + "' failed");
}

SampleTable SampleTable::read(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("table: cannot open '" + path + "'");
    SampleTable table;
    std::string line;
    if (!std::getline(is, line)) throw UsageError("table: '" + path + "' is empty");
    {
        std::istringstream hs(line);
        std::string name;
        while (hs >> name) table.columns.push_back(name);
    }
    if (table.columns.empty()) throw UsageError("table: '" + path + "' has no header");
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            double v;
            if (!(ls >> v))
                throw UsageError("table: '" + path + "' row " + std::to_string(rows + 1) +
                                 " is malformed");
            values.push_back(v);
        }
        ++rows;
    }
    table.data.rows = rows;
    table.data.cols = table.columns.size();
    table.data.data = std::move(values);
    return table;
}

}  // namespace ckr
