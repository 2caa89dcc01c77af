#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gazesim/util/errors.hpp"

namespace gazesim {

constexpr size_t kNodeFeatureDim = 144;
constexpr size_t kEdgeFeatureDim = 5;
constexpr size_t kAppearanceDim = 128;
constexpr size_t kMaskW = 16;
constexpr size_t kMaskH = 8;

// Feature layout: [x, y, bbox_w, bbox_h, score, appearance(128), depth,
// one-hot(10)].
constexpr size_t kFeatX = 0;
constexpr size_t kFeatY = 1;
constexpr size_t kFeatW = 2;
constexpr size_t kFeatH = 3;
constexpr size_t kFeatScore = 4;
constexpr size_t kFeatAppearance = 5;
constexpr size_t kFeatDepth = 133;
constexpr size_t kFeatOneHot = 134;
constexpr size_t kOneHotDim = 10;

enum class NodeType { Vehicle, Person, Static, Gaze, Structure };
constexpr int kNodeTypeCount = 5;

const std::string& node_type_name(NodeType t);

// Detector labels, in one-hot order; gaze/structure occupy the last two slots.
struct LabelInfo {
    NodeType type;
    int one_hot;  // index into the 10-slot one-hot block
};
// Throws DataError naming the label when it is not one of the 8 detector
// classes.
LabelInfo classify_label(const std::string& label);
const std::vector<std::string>& detector_labels();

struct Detection {
    std::string label;
    double cx = 0, cy = 0, w = 0, h = 0;
    double score = 1.0;
    double depth = 0.0;
    std::vector<double> appearance;  // empty or 128 entries
};

// One graph timestep worth of raw inputs.
struct FrameData {
    std::vector<Detection> detections;
    std::array<double, kMaskW * kMaskH> mask{};  // row-major, 8 rows x 16 cols
    std::optional<std::pair<double, double>> gaze;
};

struct Node {
    int id = -1;
    NodeType type = NodeType::Gaze;
    int t = 0;  // 1-based timestep within the window
    std::vector<double> features;
    // Position of the originating detection within its frame's detection
    // list; -1 for gaze and structure nodes.
    int det_index = -1;
};

struct Edge {
    int src = -1;
    int dst = -1;
    bool temporal = false;
    std::array<double, kEdgeFeatureDim> affinity{};
};

struct SceneGraph {
    int T = 0;
    double frame_w = 1.0;
    double frame_h = 1.0;
    std::vector<Node> nodes;       // grouped by ascending timestep
    std::vector<Edge> edges;
    std::vector<int> step_begin;   // size T+1; timestep t owns nodes
                                   // [step_begin[t-1], step_begin[t])

    int nodes_at(int t_begin) const { return step_begin[t_begin]; }
    std::pair<int, int> step_range(int t) const {
        return {step_begin[t - 1], step_begin[t]};
    }
};

}  // namespace gazesim
