#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazesim/data/dataset.hpp"
#include "gazesim/model/model.hpp"

namespace gazesim {

struct TrainConfig {
    ModelConfig model;
    double base_lr = 3e-4;
    double odn_lr_scale = 0.1;
    double weight_decay = 1e-6;
    int batch_size = 16;
    int epochs = 20;
    std::uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per completed epoch
    std::vector<double> val_loss;
    int best_epoch = -1;  // 1-based; -1 when no validation ran
    std::uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
};

struct TrainResult {
    GazeModel model;  // best-validation parameters (last good on abort)
    TrainReport report;
};

// Seeded shuffle of [0, n), chunked into batches; last partial batch kept.
std::vector<std::vector<int>> make_batches(size_t n, int batch_size, Rng& rng);

// argmin over validation losses, ties to the earlier epoch. 1-based.
int validate_select(const std::vector<double>& val_losses);

// Mean NLL over the samples in inference mode; never touches running stats.
double evaluate_nll(GazeModel& model, const std::vector<WindowSample>& samples,
                    int batch_size);

TrainResult train(const TrainConfig& cfg,
                  const std::vector<WindowSample>& train_set,
                  const std::vector<WindowSample>& val_set);

std::string train_report_json(const TrainConfig& cfg, const TrainReport& r);

}  // namespace gazesim
