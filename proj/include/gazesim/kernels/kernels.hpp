#pragma once

#include <cstddef>
#include <string>

namespace gazesim::kernels {

// Double-precision inner-loop kernels behind a runtime-selected backend.
// All variants compute bit-identical results: per output element the
// accumulation order is fixed (ascending k, separate mul and add, no FMA
// contraction), so the equivalence tests can compare backends with memcmp.
enum class Backend { Scalar, Avx2, Neon };

struct Dispatch {
    // C[n x q] = A[n x p] * B[p x q], row-major.
    void (*matmul_nn)(const double* a, const double* b, double* c,
                      size_t n, size_t p, size_t q);
    // C += A * B
    void (*matmul_nn_acc)(const double* a, const double* b, double* c,
                          size_t n, size_t p, size_t q);
    // C[p x q] += A^T * B with A[n x p], B[n x q].
    void (*matmul_tn_acc)(const double* a, const double* b, double* c,
                          size_t n, size_t p, size_t q);
    void (*add)(const double* a, const double* b, double* out, size_t n);
    void (*sub)(const double* a, const double* b, double* out, size_t n);
    void (*mul)(const double* a, const double* b, double* out, size_t n);
    void (*scale)(double alpha, const double* x, double* out, size_t n);
    void (*axpy)(double alpha, const double* x, double* y, size_t n);  // y += alpha*x
    void (*add_inplace)(double* y, const double* x, size_t n);         // y += x
    void (*relu)(const double* x, double* out, size_t n);
    // out = x > 0 ? g : 0  (relu backward)
    void (*relu_bwd)(const double* x, const double* g, double* out, size_t n);
};

// Active dispatch table; resolved on first use (best supported backend,
// overridable with the GAZESIM_KERNELS env var: scalar|avx2|neon).
const Dispatch& active();
Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b);  // throws ConfigError if unsupported
std::string backend_name(Backend b);

const Dispatch& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const Dispatch& avx2_table();
#endif
#if defined(__aarch64__)
const Dispatch& neon_table();
#endif

}  // namespace gazesim::kernels
