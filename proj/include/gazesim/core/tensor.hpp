#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "gazesim/util/errors.hpp"

namespace gazesim {

// Row-major 2-D double tensor. Scalars are 1x1, row vectors 1xN.
struct Tensor {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor(size_t r, size_t c, std::initializer_list<double> v)
        : rows(r), cols(c), data(v) {
        if (data.size() != r * c) throw DimError("tensor init size mismatch");
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }

    size_t size() const { return rows * cols; }
    double item() const {
        if (size() != 1) throw DimError("item() requires a 1x1 tensor");
        return data[0];
    }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }

    double& at(size_t i, size_t j) {
#ifndef NDEBUG
        if (i >= rows || j >= cols) throw DimError("tensor index out of range");
#endif
        return data[i * cols + j];
    }
    double at(size_t i, size_t j) const {
#ifndef NDEBUG
        if (i >= rows || j >= cols) throw DimError("tensor index out of range");
#endif
        return data[i * cols + j];
    }

    bool same_shape(const Tensor& o) const {
        return rows == o.rows && cols == o.cols;
    }
};

inline Tensor transpose(const Tensor& a) {
    Tensor out(a.cols, a.rows);
    for (size_t i = 0; i < a.rows; ++i)
        for (size_t j = 0; j < a.cols; ++j) out.data[j * a.rows + i] = a.data[i * a.cols + j];
    return out;
}

}  // namespace gazesim
