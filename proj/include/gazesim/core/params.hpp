#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gazesim/core/tensor.hpp"
#include "gazesim/util/rng.hpp"

namespace gazesim {

enum class Init { Zeros, Ones, KaimingUniform };

// Named parameter tensors, ordered by name for deterministic iteration.
// Initial values are drawn from an RNG seeded by hash(name, seed), so the
// order in which parameters get created (e.g. lazily, per realized edge
// type) cannot change their values.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

    Tensor& get_or_create(const std::string& name, size_t rows, size_t cols,
                          Init init) {
        auto it = map_.find(name);
        if (it != map_.end()) {
            if (it->second.rows != rows || it->second.cols != cols)
                throw DimError("parameter '" + name + "' shape mismatch");
            return it->second;
        }
        if (frozen)
            throw ConfigError("parameter '" + name +
                              "' missing from frozen parameter store");
        Tensor t(rows, cols);
        switch (init) {
            case Init::Zeros:
                break;
            case Init::Ones:
                for (double& x : t.data) x = 1.0;
                break;
            case Init::KaimingUniform: {
                Rng rng(hash_name(name, seed_));
                const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
                for (double& x : t.data) x = rng.uniform(-bound, bound);
                break;
            }
        }
        return map_.emplace(name, std::move(t)).first->second;
    }

    bool has(const std::string& name) const { return map_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = map_.find(name);
        if (it == map_.end())
            throw ConfigError("unknown parameter '" + name + "'");
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = map_.find(name);
        if (it == map_.end())
            throw ConfigError("unknown parameter '" + name + "'");
        return it->second;
    }

    std::map<std::string, Tensor>& all() { return map_; }
    const std::map<std::string, Tensor>& all() const { return map_; }
    std::uint64_t seed() const { return seed_; }

    // When frozen (inference), referencing a parameter that was never
    // created during training is an error instead of a silent fresh init.
    bool frozen = false;

private:
    std::map<std::string, Tensor> map_;
    std::uint64_t seed_;
};

// Running batch-norm statistics are stored alongside weights but are not
// touched by the optimizer.
inline bool is_trainable_param(const std::string& name) {
    return name.find(".running_") == std::string::npos;
}

}  // namespace gazesim
