#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gazesim/core/tensor.hpp"
#include "gazesim/data/trace.hpp"
#include "gazesim/post/gaze_post.hpp"

namespace gazesim {

// Dynamic time warping over {step down, step right, step diagonal} with
// Euclidean pointwise cost, unnormalized. Normalized coordinates are scaled
// to pixels first (default 640x320 frame).
double dtw(const GazeTrace& a, const GazeTrace& b, double scale_w = 640.0,
           double scale_h = 320.0);

// Mean of the per-coordinate Pearson correlations after linearly resampling
// the shorter trace onto the longer one's sample count. A constant
// coordinate has no defined correlation and raises DataError.
double temporal_correlation(const GazeTrace& a, const GazeTrace& b);

// Scanpath tokens: 16x8 grid cell indices (row * 16 + col).
std::vector<int> scanpath_tokens(const GazeTrace& t);
int levenshtein(const std::vector<int>& a, const std::vector<int>& b);
int levenshtein_scanpath(const GazeTrace& a, const GazeTrace& b);

// For each generated trace, the best metric value over the reference set
// (min when lower_better, else max). With leave_one_out the two sets must be
// the same collection (self-comparison of references) and entry i skips
// reference i. stddev is the sample standard deviation (0 for one value).
struct PairStats {
    double mean = 0;
    double stddev = 0;
    std::vector<double> best;  // per generated trace
};
PairStats pair_best_match(
    const std::vector<GazeTrace>& gen, const std::vector<GazeTrace>& ref,
    const std::function<double(const GazeTrace&, const GazeTrace&)>& metric,
    bool lower_better, bool leave_one_out = false);

struct FixationStats {
    int count = 0;
    double rate = 0;  // fixations per second
    std::optional<double> mean_duration;
    std::optional<double> std_duration;      // sample std; needs >= 2
    std::optional<double> mean_saccade_amp;  // consecutive centroids; >= 2
};
FixationStats fixation_stats(const std::vector<Fixation>& fixations,
                             double duration_sec);

// Time to first fixation inside the area of interest (distance <= radius,
// normalized units). Empty when the scanpath never enters it.
std::optional<double> aoi_tff(const std::vector<Fixation>& fixations,
                              double aoi_x, double aoi_y, double radius = 0.10);

// Mean population z-score of the map at fixation pixels. A flat map has no
// z-scores and raises DataError.
double nss(const Tensor& saliency, const std::vector<Fixation>& fixations);

// Pixel-center Gaussian fitted to fixation centroids (stds floored at 0.01),
// normalized to sum 1; the information-gain baseline.
Tensor fit_gaussian_baseline(const std::vector<Fixation>& fixations, int width,
                             int height);

// Mean over fixations of log2((s+eps)/(b+eps)) with both maps normalized to
// sum 1, eps = 1e-12.
double information_gain(const Tensor& saliency, const Tensor& baseline,
                        const std::vector<Fixation>& fixations);

// AUC with thresholds at the distinct fixation saliency values; TPR over
// fixations, FPR over all pixels, trapezoid through (0,0) and (1,1).
double auc_judd(const Tensor& saliency, const std::vector<Fixation>& fixations);

// Event-aligned displacement profile: d[k] = |p[k+1] - p[k]| averaged across
// events at each offset in [-half_window, +half_window]. Events whose window
// leaves the trace are skipped.
struct GazeDynamics {
    std::vector<double> offset_sec;
    std::vector<double> mean_disp;
    int events_used = 0;
};
GazeDynamics gaze_state_dynamics(
    const std::vector<GazeTrace>& traces,
    const std::vector<std::vector<double>>& event_times,
    double half_window_sec = 0.5);

// Welch PSD (Hann window, 50% overlap, per-segment mean removal, one-sided,
// DC dropped) of each trace's distance to the across-trace mean trajectory,
// averaged over traces. Needs at least two equal-length, equal-rate traces.
struct Psd {
    std::vector<double> freq;  // Hz
    std::vector<double> power;
};
Psd residual_psd(const std::vector<GazeTrace>& traces);

// Trapezoid integral of the PSD over (hi_lo, hi_hi) divided by the integral
// over (lo_lo, lo_hi), band edges interpolated. A zero low band is an error.
double band_ratio(const Psd& psd, double lo_lo = 0.1, double lo_hi = 1.0,
                  double hi_lo = 1.0, double hi_hi = 5.0);

}  // namespace gazesim
