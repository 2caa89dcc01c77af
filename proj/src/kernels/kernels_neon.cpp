#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

#include "gazesim/kernels/kernels.hpp"

// NEON kernels (2-wide f64). Same mul+add accumulation order as the scalar
// reference, so results are bit-identical.

namespace gazesim::kernels {
namespace {

void v_matmul_nn_acc(const double* a, const double* b, double* c,
                     size_t n, size_t p, size_t q) {
    for (size_t i = 0; i < n; ++i) {
        const double* arow = a + i * p;
        double* crow = c + i * q;
        for (size_t k = 0; k < p; ++k) {
            const float64x2_t av = vdupq_n_f64(arow[k]);
            const double* brow = b + k * q;
            size_t j = 0;
            for (; j + 2 <= q; j += 2) {
                const float64x2_t cv = vld1q_f64(crow + j);
                const float64x2_t bv = vld1q_f64(brow + j);
                vst1q_f64(crow + j, vaddq_f64(cv, vmulq_f64(av, bv)));
            }
            for (; j < q; ++j) crow[j] += arow[k] * brow[j];
        }
    }
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
            const float64x2_t av = vdupq_n_f64(arow[i]);
            double* crow = c + i * q;
            size_t j = 0;
            for (; j + 2 <= q; j += 2) {
                const float64x2_t cv = vld1q_f64(crow + j);
                const float64x2_t bv = vld1q_f64(brow + j);
                vst1q_f64(crow + j, vaddq_f64(cv, vmulq_f64(av, bv)));
            }
            for (; j < q; ++j) crow[j] += arow[i] * brow[j];
        }
    }
}

void v_add(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(double alpha, const double* x, double* out, size_t n) {
    const float64x2_t av = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(out + i, vmulq_f64(av, vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void v_axpy(double alpha, const double* x, double* y, size_t n) {
    const float64x2_t av = vdupq_n_f64(alpha);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t yv = vld1q_f64(y + i);
        vst1q_f64(y + i, vaddq_f64(yv, vmulq_f64(av, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void v_add_inplace(double* y, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void v_relu(const double* x, double* out, size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t xv = vld1q_f64(x + i);
        const uint64x2_t mask = vcgtq_f64(xv, zero);
        vst1q_f64(out + i,
                  vreinterpretq_f64_u64(vandq_u64(
                      mask, vreinterpretq_u64_f64(xv))));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void v_relu_bwd(const double* x, const double* g, double* out, size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        vst1q_f64(out + i,
                  vreinterpretq_f64_u64(vandq_u64(
                      mask, vreinterpretq_u64_f64(vld1q_f64(g + i)))));
    }
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

}  // namespace

const Dispatch& neon_table() {
    static const Dispatch t = {
        v_matmul_nn, v_matmul_nn_acc, v_matmul_tn_acc,
        v_add, v_sub, v_mul, v_scale, v_axpy, v_add_inplace,
        v_relu, v_relu_bwd,
    };
    return t;
}

}  // namespace gazesim::kernels

#endif  // aarch64
