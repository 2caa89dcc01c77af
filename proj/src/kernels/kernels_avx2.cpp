#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "gazesim/kernels/kernels.hpp"

// AVX2 kernels. Deliberately mul+add (no FMA) so each output element sees the
// exact same rounding sequence as the scalar reference.

namespace gazesim::kernels {
namespace {

inline void tile_rows_acc(const double* a, const double* b, double* c,
                          size_t i0, size_t rows, size_t p, size_t q) {
    // rows in [1,4]: C[i0..i0+rows) += A[i0..) * B
    size_t j = 0;
    for (; j + 8 <= q; j += 8) {
        __m256d acc[4][2];
        for (size_t r = 0; r < rows; ++r) {
            acc[r][0] = _mm256_loadu_pd(c + (i0 + r) * q + j);
            acc[r][1] = _mm256_loadu_pd(c + (i0 + r) * q + j + 4);
        }
        for (size_t k = 0; k < p; ++k) {
            const __m256d b0 = _mm256_loadu_pd(b + k * q + j);
            const __m256d b1 = _mm256_loadu_pd(b + k * q + j + 4);
            for (size_t r = 0; r < rows; ++r) {
                const __m256d av = _mm256_broadcast_sd(a + (i0 + r) * p + k);
                acc[r][0] = _mm256_add_pd(acc[r][0], _mm256_mul_pd(av, b0));
                acc[r][1] = _mm256_add_pd(acc[r][1], _mm256_mul_pd(av, b1));
            }
        }
        for (size_t r = 0; r < rows; ++r) {
            _mm256_storeu_pd(c + (i0 + r) * q + j, acc[r][0]);
            _mm256_storeu_pd(c + (i0 + r) * q + j + 4, acc[r][1]);
        }
    }
    for (; j + 4 <= q; j += 4) {
        __m256d acc[4];
        for (size_t r = 0; r < rows; ++r)
            acc[r] = _mm256_loadu_pd(c + (i0 + r) * q + j);
        for (size_t k = 0; k < p; ++k) {
            const __m256d b0 = _mm256_loadu_pd(b + k * q + j);
            for (size_t r = 0; r < rows; ++r) {
                const __m256d av = _mm256_broadcast_sd(a + (i0 + r) * p + k);
                acc[r] = _mm256_add_pd(acc[r], _mm256_mul_pd(av, b0));
            }
        }
        for (size_t r = 0; r < rows; ++r)
            _mm256_storeu_pd(c + (i0 + r) * q + j, acc[r]);
    }
    for (; j < q; ++j) {
        for (size_t r = 0; r < rows; ++r) {
            double acc = c[(i0 + r) * q + j];
            for (size_t k = 0; k < p; ++k)
                acc += a[(i0 + r) * p + k] * b[k * q + j];
            c[(i0 + r) * q + j] = acc;
        }
    }
}

void v_matmul_nn_acc(const double* a, const double* b, double* c,
                     size_t n, size_t p, size_t q) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) tile_rows_acc(a, b, c, i, 4, p, q);
    if (i < n) tile_rows_acc(a, b, c, i, n - i, p, q);
}

void v_matmul_nn(const double* a, const double* b, double* c,
                 size_t n, size_t p, size_t q) {
    std::memset(c, 0, n * q * sizeof(double));
    v_matmul_nn_acc(a, b, c, n, p, q);
}

void v_matmul_tn_acc(const double* a, const double* b, double* c,
                     size_t n, size_t p, size_t q) {
    for (size_t k = 0; k < n; ++k) {
        const double* arow = a + k * p;
        const double* brow = b + k * q;
        for (size_t i = 0; i < p; ++i) {
            const __m256d av = _mm256_broadcast_sd(arow + i);
            double* crow = c + i * q;
            size_t j = 0;
            for (; j + 4 <= q; j += 4) {
                const __m256d cv = _mm256_loadu_pd(crow + j);
                const __m256d bv = _mm256_loadu_pd(brow + j);
                _mm256_storeu_pd(crow + j,
                                 _mm256_add_pd(cv, _mm256_mul_pd(av, bv)));
            }
            const double aki = arow[i];
            for (; j < q; ++j) crow[j] += aki * brow[j];
        }
    }
}

void v_add(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(double alpha, const double* x, double* out, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void v_axpy(double alpha, const double* x, double* y, size_t n) {
    const __m256d av = _mm256_set1_pd(alpha);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(
            y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_add_inplace(double* y, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                              _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void v_relu(const double* x, double* out, size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd(const double* x, const double* g, double* out, size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask =
            _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i,
                         _mm256_and_pd(mask, _mm256_loadu_pd(g + i)));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Dispatch& avx2_table() {
    static const Dispatch t = {
        v_matmul_nn, v_matmul_nn_acc, v_matmul_tn_acc,
        v_add, v_sub, v_mul, v_scale, v_axpy, v_add_inplace,
        v_relu, v_relu_bwd,
    };
    return t;
}

}  // namespace gazesim::kernels

#endif  // x86_64
