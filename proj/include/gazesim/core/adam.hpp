#pragma once

#include <map>
#include <string>

#include "gazesim/core/params.hpp"

namespace gazesim {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-6;  // decoupled, matrices only
    double odn_lr_scale = 0.1;   // applied to parameters named odn.*
};

// Adam with decoupled weight decay. Weight decay only touches rank-2 tensors
// (rows > 1 and cols > 1), i.e. weight matrices but not biases, norm scales
// or gate scalars. Parameters whose name starts with "odn." use a reduced
// learning rate.
class AdamOptimizer {
public:
    explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore& params, const std::map<std::string, Tensor>& grads);
    std::int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct State {
        Tensor m, v;
    };
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, State> state_;
};

}  // namespace gazesim
