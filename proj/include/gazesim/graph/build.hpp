#pragma once

#include "gazesim/graph/types.hpp"

namespace gazesim {

// One node per detection (input order), then the gaze node, then the
// structure node. Node ids are left unset; assemble_window_graph assigns
// them.
std::vector<Node> build_frame_nodes(const std::vector<Detection>& detections,
                                    const std::array<double, 128>& mask,
                                    std::pair<double, double> gaze, int t);

// [dst.x - src.x, dst.y - src.y, dst.depth - src.depth, dst.t - src.t,
// cos(dst.appearance, src.appearance)]; zero-norm appearance cosine is 0.
std::array<double, kEdgeFeatureDim> edge_affinity(const Node& src,
                                                  const Node& dst);

// Spatial: both directions between distinct nodes within each timestep.
// Temporal: src at t-dt to dst at t for each dt in t_offsets with t-dt >= 1.
// Offsets are iterated in ascending sorted order.
void connect_edges(SceneGraph& g, const std::vector<int>& t_offsets);

SceneGraph assemble_window_graph(const std::vector<FrameData>& frames, int T,
                                 const std::vector<int>& t_offsets);

// Drops the oldest timestep, shifts the rest back by one, appends new_frame
// with its gaze node at sampled_gaze (clamped to [0,1]^2), rebuilds edges.
SceneGraph advance_window(const SceneGraph& g, const FrameData& new_frame,
                          std::pair<double, double> sampled_gaze,
                          const std::vector<int>& t_offsets);

}  // namespace gazesim
