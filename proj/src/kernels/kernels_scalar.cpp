#include <cstring>

#include "gazesim/kernels/kernels.hpp"

// Reference kernels. The loop nests are the contract: every backend must
// accumulate each output element over ascending k with separate multiply and
// add, so results match the vectorized variants bit for bit.

namespace gazesim::kernels {
namespace {

void s_matmul_nn_acc(const double* a, const double* b, double* c,
                     size_t n, size_t p, size_t q) {
    for (size_t i = 0; i < n; ++i) {
        const double* arow = a + i * p;
        double* crow = c + i * q;
        for (size_t k = 0; k < p; ++k) {
            const double aik = arow[k];
            const double* brow = b + k * q;
            for (size_t j = 0; j < q; ++j) crow[j] += aik * brow[j];
        }
    }
}

void s_matmul_nn(const double* a, const double* b, double* c,
                 size_t n, size_t p, size_t q) {
    std::memset(c, 0, n * q * sizeof(double));
    s_matmul_nn_acc(a, b, c, n, p, q);
}

void s_matmul_tn_acc(const double* a, const double* b, double* c,
                     size_t n, size_t p, size_t q) {
    for (size_t k = 0; k < n; ++k) {
        const double* arow = a + k * p;
        const double* brow = b + k * q;
        for (size_t i = 0; i < p; ++i) {
            const double aki = arow[i];
            double* crow = c + i * q;
            for (size_t j = 0; j < q; ++j) crow[j] += aki * brow[j];
        }
    }
}

void s_add(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(double alpha, const double* x, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void s_axpy(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_add_inplace(double* y, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

void s_relu(const double* x, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_bwd(const double* x, const double* g, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Dispatch& scalar_table() {
    static const Dispatch t = {
        s_matmul_nn, s_matmul_nn_acc, s_matmul_tn_acc,
        s_add, s_sub, s_mul, s_scale, s_axpy, s_add_inplace,
        s_relu, s_relu_bwd,
    };
    return t;
}

}  // namespace gazesim::kernels
