#include <cstdlib>
#include <string>

#include "gazesim/kernels/kernels.hpp"
#include "gazesim/util/errors.hpp"

namespace gazesim::kernels {
namespace {

Backend detect_best() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#endif
#if defined(__aarch64__)
    return Backend::Neon;
#endif
    return Backend::Scalar;
}

Backend initial_backend() {
    if (const char* env = std::getenv("GAZESIM_KERNELS")) {
        const std::string s(env);
        Backend b;
        if (s == "scalar") b = Backend::Scalar;
        else if (s == "avx2") b = Backend::Avx2;
        else if (s == "neon") b = Backend::Neon;
        else throw ConfigError("GAZESIM_KERNELS: unknown backend '" + s + "'");
        if (!backend_supported(b))
            throw ConfigError("GAZESIM_KERNELS: backend '" + s +
                              "' not supported on this machine");
        return b;
    }
    return detect_best();
}

Backend& current() {
    static Backend b = initial_backend();
    return b;
}

}  // namespace

bool backend_supported(Backend b) {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "?";
}

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw ConfigError("kernel backend '" + backend_name(b) +
                          "' not supported on this machine");
    current() = b;
}

Backend active_backend() { return current(); }

const Dispatch& active() {
    switch (current()) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::Avx2: return avx2_table();
#endif
#if defined(__aarch64__)
        case Backend::Neon: return neon_table();
#endif
        default: return scalar_table();
    }
}

}  // namespace gazesim::kernels
