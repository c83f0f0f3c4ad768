#ifndef CKR_TENSOR_HPP
#define CKR_TENSOR_HPP

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ckr/util.hpp"

namespace ckr {

// Dense row-major 2-D array of doubles. Everything in this project is a
// matrix: batches are [rows x cols] with one sample per row, vectors are
// [1 x n] or [n x 1] as convenient.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }
    std::size_t size() const { return data.size(); }
    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

using Vec = std::vector<double>;

// Trainable state: values plus a same-shape gradient accumulator. The shape
// list is kept verbatim for checkpoint manifests; storage is the flattened
// row-major buffer.
struct ParameterTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool trainable = true;

    ParameterTensor() = default;
    ParameterTensor(std::string n, std::vector<std::size_t> s, bool train = true)
        : name(std::move(n)), shape(std::move(s)), trainable(train) {
        std::size_t total = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw ConfigError("parameter '" + name + "' has a zero dimension");
            total *= d;
        }
        values.assign(total, 0.0);
        grad.assign(total, 0.0);
    }

    std::size_t size() const { return values.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

}  // namespace ckr

#endif
