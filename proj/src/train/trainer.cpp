#include "gazesim/train/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "gazesim/core/adam.hpp"
#include "json.hpp"

namespace gazesim {
namespace {

bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

// One merged forward + NLL over the samples named by `idx`.
struct BatchEval {
    Tape tape;
    Id loss = -1;
    std::map<std::string, Id> param_ids;
};

void run_batch(GazeModel& model, const std::vector<WindowSample>& samples,
               const std::vector<int>& idx, bool training, bool update_stats,
               BatchEval& out) {
    std::vector<const SceneGraph*> graphs;
    std::vector<std::pair<double, double>> targets;
    graphs.reserve(idx.size());
    targets.reserve(idx.size());
    for (int i : idx) {
        graphs.push_back(&samples[static_cast<size_t>(i)].graph);
        targets.push_back(samples[static_cast<size_t>(i)].target);
    }
    GraphBatch batch = merge_graphs(graphs);
    auto f = model.forward(out.tape, batch, training, update_stats,
                           training ? &out.param_ids : nullptr);
    out.loss = model.nll(out.tape, f, targets);
}

}  // namespace

std::vector<std::vector<int>> make_batches(size_t n, int batch_size, Rng& rng) {
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
        size_t stop = std::min(n, start + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<long>(start),
                             order.begin() + static_cast<long>(stop));
    }
    return batches;
}

int validate_select(const std::vector<double>& val_losses) {
    if (val_losses.empty()) throw DimError("no validation losses to select from");
    size_t best = 0;
    for (size_t i = 1; i < val_losses.size(); ++i)
        if (val_losses[i] < val_losses[best]) best = i;
    return static_cast<int>(best) + 1;
}

double evaluate_nll(GazeModel& model, const std::vector<WindowSample>& samples,
                    int batch_size) {
    if (samples.empty()) throw DataError("cannot evaluate an empty sample set");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    double total = 0;
    std::vector<int> idx;
    for (size_t start = 0; start < samples.size();
         start += static_cast<size_t>(batch_size)) {
        size_t stop =
            std::min(samples.size(), start + static_cast<size_t>(batch_size));
        idx.clear();
        for (size_t i = start; i < stop; ++i) idx.push_back(static_cast<int>(i));
        BatchEval ev;
        run_batch(model, samples, idx, /*training=*/false,
                  /*update_stats=*/false, ev);
        total += ev.tape.val(ev.loss).item() * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& cfg,
                  const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set) {
    if (train_set.empty())
        throw DataError("training requires a nonempty training set");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be positive");
    if (cfg.epochs < 0) throw ConfigError("epoch count must be non-negative");

    GazeModel model(cfg.model, cfg.seed);
    AdamConfig acfg;
    acfg.lr = cfg.base_lr;
    acfg.weight_decay = cfg.weight_decay;
    acfg.odn_lr_scale = cfg.odn_lr_scale;
    AdamOptimizer opt(acfg);
    Rng rng(cfg.seed);

    TrainReport report;
    report.seed = cfg.seed;

    const size_t n = train_set.size();
    double best_val = std::numeric_limits<double>::infinity();
    std::map<std::string, Tensor> best_params;
    bool have_best = false;

    auto abort = [&](std::string reason,
                     const std::map<std::string, Tensor>* restore) {
        report.aborted = true;
        report.abort_reason = std::move(reason);
        if (restore) model.params().all() = *restore;
    };

    for (int epoch = 1; epoch <= cfg.epochs && !report.aborted; ++epoch) {
        auto batches = make_batches(n, cfg.batch_size, rng);
        double epoch_loss = 0;
        int batch_no = 0;
        for (const auto& idx : batches) {
            ++batch_no;
            // Forward mutates BN running stats and step() mutates weights,
            // so keep a pre-batch copy as the last-good state.
            std::map<std::string, Tensor> before = model.params().all();
            BatchEval ev;
            run_batch(model, train_set, idx, /*training=*/true,
                      /*update_stats=*/true, ev);
            double loss = ev.tape.val(ev.loss).item();
            if (!std::isfinite(loss)) {
                abort("non-finite training loss at epoch " +
                          std::to_string(epoch) + " batch " +
                          std::to_string(batch_no),
                      &before);
                break;
            }
            ev.tape.backward(ev.loss);
            std::map<std::string, Tensor> grads;
            for (const auto& [name, id] : ev.param_ids) {
                if (!ev.tape.has_grad(id)) continue;
                const Tensor& g = ev.tape.grad(id);
                if (!all_finite(g)) {
                    abort("non-finite gradient for parameter '" + name +
                              "' at epoch " + std::to_string(epoch) +
                              " batch " + std::to_string(batch_no),
                          &before);
                    break;
                }
                grads.emplace(name, g);
            }
            if (report.aborted) break;
            opt.step(model.params(), grads);
            epoch_loss += loss * static_cast<double>(idx.size());
        }
        if (report.aborted) break;

        report.train_loss.push_back(epoch_loss / static_cast<double>(n));
        if (!val_set.empty()) {
            double vl = evaluate_nll(model, val_set, cfg.batch_size);
            if (!std::isfinite(vl)) {
                abort("non-finite validation loss at epoch " +
                          std::to_string(epoch),
                      nullptr);
                break;
            }
            report.val_loss.push_back(vl);
            if (vl < best_val) {
                best_val = vl;
                best_params = model.params().all();
                have_best = true;
            }
        }
    }

    if (!report.aborted && have_best) {
        report.best_epoch = validate_select(report.val_loss);
        model.params().all() = best_params;
    }
    return TrainResult{std::move(model), std::move(report)};
}

std::string train_report_json(const TrainConfig& cfg, const TrainReport& r) {
    nlohmann::json j;
    j["seed"] = r.seed;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["base_lr"] = cfg.base_lr;
    j["odn_lr_scale"] = cfg.odn_lr_scale;
    j["weight_decay"] = cfg.weight_decay;
    j["model"] = {{"d", cfg.model.d},
                  {"L", cfg.model.L},
                  {"ffn_hidden", cfg.model.ffn_hidden},
                  {"variant", cfg.model.variant},
                  {"head", cfg.model.head},
                  {"T", cfg.model.T},
                  {"t_offsets", cfg.model.t_offsets}};
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["best_epoch"] = r.best_epoch;
    j["aborted"] = r.aborted;
    j["abort_reason"] = r.abort_reason;
    return j.dump(1);
}

}  // namespace gazesim
