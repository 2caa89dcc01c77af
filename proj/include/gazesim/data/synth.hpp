#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazesim/data/dataset.hpp"

namespace gazesim {

struct TrackSpec {
    std::string label;  // one of the 8 detector classes
    std::vector<std::pair<double, double>> waypoints;  // uniform in time
    double w = 0.08, h = 0.08;
    double depth0 = 0.5, depth1 = 0.5;  // linear depth profile
    double score = 0.9;
    std::vector<double> appearance;  // fixed unit identity code
};

struct HazardSpec {
    int track = 0;
    double onset = 0.0;
    double duration = 0.0;  // seconds active
    double severity = 1.0;
};

struct SceneScript {
    double fps = 10.0;
    double duration = 10.0;
    std::uint64_t seed = 0;
    std::vector<TrackSpec> tracks;
    std::vector<HazardSpec> hazards;
};

// Piecewise-linear interpolation of the waypoints, which are spaced
// uniformly over [0, duration]. t outside the range clamps to the ends.
std::pair<double, double> track_position(const TrackSpec& track, double t,
                                         double duration);

// Frames at script.fps, detections in track order, lower-half drivable mask,
// gaze left unset. Waypoints outside [0,1]^2 are a script error.
std::vector<FrameData> generate_scene(const SceneScript& script);

struct GazePolicy {
    enum class Kind { AttendNearestHazard, CenterBias, PursuitOf };
    Kind kind = Kind::AttendNearestHazard;
    int track = -1;             // PursuitOf target
    double noise_sigma = 0.01;  // fixation jitter, normalized units
    int saccade_steps = 2;      // length of the linear jump to a new target
    // Blink simulation; interval <= 0 disables blinks.
    double blink_interval = 3.0;  // mean gap between blinks, seconds
    double blink_min = 0.1, blink_max = 0.2;  // blink length range, seconds
};

const std::string& policy_name(GazePolicy::Kind kind);

// The target-selection rule: nearest active hazard's track (by Euclidean
// distance from the given gaze position), -1 when no hazard is active. Ties
// break toward the lower track id.
int attended_track(const SceneScript& script, double t,
                   std::pair<double, double> gaze);

struct ScriptedGaze {
    GazeTrace trace;            // at the requested rate; NaN during blinks
    std::vector<int> attended;  // per sample: attended track id or -1
};

ScriptedGaze scripted_gaze(const SceneScript& script, const GazePolicy& policy,
                           double rate, std::uint64_t seed);

struct SynthConfig {
    int sequences = 200;
    double duration = 10.0;   // seconds per sequence
    double fps = 10.0;        // detection frame rate
    double graph_rate = 20.0; // model step rate (frames duplicated up to it)
    double gaze_rate = 60.0;  // raw gaze sampling rate
    int min_objects = 3;
    int max_objects = 8;
    int subjects = 2;  // gaze traces generated per sequence
    GazePolicy policy;
    std::uint64_t seed = 0;
};

SceneScript random_script(std::uint64_t seed, const SynthConfig& cfg);

// Writes seq_NNNN/{detections.jsonl, masks.jsonl, gaze.csv, gaze_sK.csv...,
// attended.csv, meta.json} under out_dir. Returns the sequence directories
// in index order.
std::vector<std::string> generate_dataset(const std::string& out_dir,
                                          const SynthConfig& cfg,
                                          int jobs = 1);

}  // namespace gazesim
