#include "gazesim/sim/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "gazesim/graph/build.hpp"

namespace gazesim {

Rollout rollout(GazeModel& model, const std::vector<FrameData>& frames,
                const GazeTrace& warmup_gaze, const RolloutConfig& cfg) {
    const ModelConfig& mc = model.config();
    const int T = mc.T;
    if (cfg.horizon < 1) throw ConfigError("rollout horizon must be positive");
    if (static_cast<int>(warmup_gaze.size()) < T)
        throw DataError("rollout warmup needs " + std::to_string(T) +
                        " gaze samples, have " +
                        std::to_string(warmup_gaze.size()));
    for (int i = 0; i < T; ++i) {
        if (!warmup_gaze.is_valid(static_cast<size_t>(i)))
            throw DataError("rollout warmup sample " + std::to_string(i) +
                            " is invalid; preprocess the trace first");
    }
    // The window generating step s spans frames [s-T, s); the last generated
    // step is T+horizon-1, so the highest frame touched is T+horizon-2.
    const size_t needed = static_cast<size_t>(T) + cfg.horizon - 1;
    if (frames.size() < needed)
        throw DataError("rollout of " + std::to_string(cfg.horizon) +
                        " steps needs frame " + std::to_string(needed - 1) +
                        ", but only " + std::to_string(frames.size()) +
                        " frames are available");

    Rollout out;
    out.warmup = T;
    out.trace.rate = warmup_gaze.rate;
    out.trace.t0 = warmup_gaze.t0;
    out.trace.x.assign(warmup_gaze.x.begin(), warmup_gaze.x.begin() + T);
    out.trace.y.assign(warmup_gaze.y.begin(), warmup_gaze.y.begin() + T);

    std::vector<FrameData> window(frames.begin(), frames.begin() + T);
    for (int i = 0; i < T; ++i)
        window[static_cast<size_t>(i)].gaze = {out.trace.x[static_cast<size_t>(i)],
                                               out.trace.y[static_cast<size_t>(i)]};
    SceneGraph g = assemble_window_graph(window, T, mc.t_offsets);

    Rng rng(cfg.seed);
    for (int k = 0; k < cfg.horizon; ++k) {
        GmmPrediction pred = model.predict(g);
        if (cfg.record_mixture) out.mixtures.push_back({pred.comps});
        auto [x, y] = sample_gaze(pred, rng);
        x = std::clamp(x, 0.0, 1.0);
        y = std::clamp(y, 0.0, 1.0);
        out.trace.x.push_back(x);
        out.trace.y.push_back(y);
        if (k + 1 < cfg.horizon)
            g = advance_window(g, frames[static_cast<size_t>(T + k)], {x, y},
                               mc.t_offsets);
    }
    return out;
}

std::vector<Rollout> multi_run(GazeModel& model,
                               const std::vector<FrameData>& frames,
                               const GazeTrace& warmup_gaze, int runs,
                               const RolloutConfig& cfg) {
    if (runs < 1) throw ConfigError("run count must be positive");
    std::vector<Rollout> out;
    out.reserve(static_cast<size_t>(runs));
    for (int r = 0; r < runs; ++r) {
        RolloutConfig c = cfg;
        c.seed = cfg.seed + static_cast<std::uint64_t>(r);
        out.push_back(rollout(model, frames, warmup_gaze, c));
    }
    return out;
}

}  // namespace gazesim
