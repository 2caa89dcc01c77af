#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>

namespace gazesim {

// Central-difference gradient check. eval() must recompute the objective from
// the current contents of theta; theta is restored before returning. Returns
// the max over entries of |analytic - numeric| / max(|analytic|, |numeric|,
// 1e-8).
inline double finite_diff_check(const std::function<double()>& eval,
                                double* theta, size_t n, const double* analytic,
                                double h = 1e-5) {
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double saved = theta[i];
        theta[i] = saved + h;
        const double fp = eval();
        theta[i] = saved - h;
        const double fm = eval();
        theta[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom =
            std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace gazesim
