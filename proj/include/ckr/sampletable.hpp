#ifndef CKR_SAMPLETABLE_HPP
#define CKR_SAMPLETABLE_HPP

#include <string>
#include <vector>

#include "ckr/tensor.hpp"

namespace ckr {

// Columnar record of per-sample values with named columns, persisted as
// headered tab-separated text with round-trip exact (%.17g) numbers.
struct SampleTable {
    std::vector<std::string> columns;
    Matrix data;  // [rows x columns]

    std::size_t rows() const { return data.rows; }
    std::size_t col(const std::string& name) const;     // throws if missing
    bool has_col(const std::string& name) const;
    Vec column(const std::string& name) const;
    void set_column(const std::string& name, const Vec& values);
    // contiguous column group "<prefix>_1".."<prefix>_k"
    Matrix column_group(const std::string& prefix) const;

    void write(const std::string& path) const;
    static SampleTable read(const std::string& path);
};

// %.17g formatting shared by all text artifacts
std::string format_double(double v);

}  // namespace ckr

#endif
