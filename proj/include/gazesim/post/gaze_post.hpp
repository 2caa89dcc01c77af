#pragma once

#include <string>
#include <vector>

#include "gazesim/core/tensor.hpp"
#include "gazesim/data/trace.hpp"
#include "gazesim/sim/simulator.hpp"

namespace gazesim {

// Repairs blink gaps (linear interpolation between the nearest valid
// neighbours, nearest-value fill at the ends) at the native rate, then
// linearly resamples to target_rate. Needs at least two valid samples.
GazeTrace preprocess_gaze(const GazeTrace& raw, double target_rate);

// Two-stage dispersion clustering. Stage 1 grows a cluster while each new
// sample stays within t1 of the running centroid; stage 2 drops members
// further than t2 from the stage-1 centroid, recomputes the centroid and
// keeps the cluster when the retained span reaches min_dur.
struct FixationParams {
    double t1 = 0.08;      // stage-1 radius, normalized screen units
    double t2 = 0.05;      // stage-2 outlier radius
    double min_dur = 0.1;  // seconds
};

struct Fixation {
    double onset = 0;     // seconds
    double duration = 0;  // seconds (retained samples x sampling period)
    double x = 0, y = 0;  // unweighted centroid of retained samples
};

std::vector<Fixation> detect_fixations(const GazeTrace& trace,
                                       const FixationParams& p = {});

// Fixation counts splatted onto a grid, blurred with a separable Gaussian
// (sigma scales with grid width relative to a 640px reference), then
// normalized so the peak is 1. An empty map stays all zero.
struct SaliencyParams {
    int width = 160;
    int height = 80;
    double sigma_base = 19.0;  // pixels at the 640-wide reference
};

Tensor build_saliency_map(const std::vector<Fixation>& fixations,
                          const SaliencyParams& p = {});

// Per generated step: mixture mass per detected object summed over runs,
// softmaxed within the step and rescaled so the top object scores 1. Gaze
// and structure components are ignored. Runs must carry recorded mixtures.
struct ObjectSalience {
    std::vector<int> det_index;  // ascending
    std::vector<double> score;
};
std::vector<ObjectSalience> rank_object_salience(
    const std::vector<Rollout>& runs);

void save_fixations_csv(const std::string& path,
                        const std::vector<Fixation>& fixations);
std::vector<Fixation> load_fixations_csv(const std::string& path);

// Bare numeric grid, one CSV row per grid row.
void save_grid_csv(const std::string& path, const Tensor& grid);
Tensor load_grid_csv(const std::string& path);

// ASCII portable graymap; values expected in [0, 1].
void save_pgm(const std::string& path, const Tensor& grid);

}  // namespace gazesim
