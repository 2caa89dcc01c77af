#pragma once

#include <cstdint>
#include <vector>

#include "gazesim/data/trace.hpp"
#include "gazesim/model/model.hpp"

namespace gazesim {

struct RolloutConfig {
    int horizon = 50;  // steps generated after the warmup
    std::uint64_t seed = 0;
    bool record_mixture = false;  // keep per-step mixture components
};

struct StepMixture {
    std::vector<GmmComponent> comps;
};

struct Rollout {
    GazeTrace trace;  // warmup samples followed by generated ones
    int warmup = 0;   // leading ground-truth sample count (= window length)
    std::vector<StepMixture> mixtures;  // horizon entries when recorded
};

// Closed-loop generation: the first T ground-truth gaze samples prime the
// window, then each step predicts a mixture, samples the next gaze point and
// slides the window forward by one frame. Frames and gaze share one rate.
Rollout rollout(GazeModel& model, const std::vector<FrameData>& frames,
                const GazeTrace& warmup_gaze, const RolloutConfig& cfg);

// Independent stochastic runs seeded seed, seed+1, ... seed+runs-1.
std::vector<Rollout> multi_run(GazeModel& model,
                               const std::vector<FrameData>& frames,
                               const GazeTrace& warmup_gaze, int runs,
                               const RolloutConfig& cfg);

}  // namespace gazesim
