#include "gazesim/core/adam.hpp"

#include <cmath>

namespace gazesim {

void AdamOptimizer::step(ParamStore& params,
                         const std::map<std::string, Tensor>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        if (!is_trainable_param(name)) continue;
        Tensor& p = params.at(name);
        if (!p.same_shape(g))
            throw DimError("gradient shape mismatch for '" + name + "'");
        auto [it, fresh] = state_.try_emplace(name);
        if (fresh) {
            it->second.m = Tensor(p.rows, p.cols);
            it->second.v = Tensor(p.rows, p.cols);
        }
        Tensor& m = it->second.m;
        Tensor& v = it->second.v;
        const double lr =
            cfg_.lr * (name.rfind("odn.", 0) == 0 ? cfg_.odn_lr_scale : 1.0);
        const bool decay = p.rows > 1 && p.cols > 1;
        for (size_t i = 0; i < p.size(); ++i) {
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
            v.data[i] =
                cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
            double upd = (m.data[i] / bc1) / (std::sqrt(v.data[i] / bc2) + cfg_.eps);
            if (decay) upd += cfg_.weight_decay * p.data[i];
            p.data[i] -= lr * upd;
        }
    }
}

}  // namespace gazesim
