#pragma once

#include <string>
#include <vector>

#include "gazesim/data/trace.hpp"
#include "gazesim/graph/build.hpp"

namespace gazesim {

// Detections: JSON lines {frame, label, bbox:[cx,cy,w,h], score, depth,
// appearance?}. Masks: one JSON array of 128 zeros/ones per frame; the mask
// file defines the frame count. Gaze is attached separately.
std::vector<FrameData> load_frames(const std::string& detections_path,
                                   const std::string& masks_path);
void save_frames(const std::string& detections_path,
                 const std::string& masks_path,
                 const std::vector<FrameData>& frames);

// Frame duplication (e.g. 10 fps video driving a 20 Hz graph -> factor 2).
std::vector<FrameData> upsample_frames(const std::vector<FrameData>& frames,
                                       int factor);

// Sidecar ground truth: which track the scripted policy attends per step
// (-1 when none). CSV header t_sec,track,det_index.
struct AttendedLabels {
    std::vector<double> t_sec;
    std::vector<int> track;
};
AttendedLabels load_attended_csv(const std::string& path);

struct WindowSample {
    SceneGraph graph;
    std::pair<double, double> target;  // gaze at the step after the window
};

// Slides a T-step window over frames paired 1:1 with gaze samples (same
// rate). Window k covers steps [k, k+T) and its target is gaze sample k+T.
std::vector<WindowSample> make_windows(const std::vector<FrameData>& frames,
                                       const GazeTrace& gaze, int T,
                                       const std::vector<int>& t_offsets,
                                       int stride);

}  // namespace gazesim
