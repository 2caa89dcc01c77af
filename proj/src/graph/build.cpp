#include "gazesim/graph/build.hpp"

#include <algorithm>
#include <cmath>

namespace gazesim {

const std::string& node_type_name(NodeType t) {
    static const std::vector<std::string> names = {"vehicle", "person",
                                                   "static", "gaze",
                                                   "structure"};
    return names[static_cast<int>(t)];
}

const std::vector<std::string>& detector_labels() {
    static const std::vector<std::string> labels = {
        "car",   "person", "bicycle",       "motorcycle",
        "bus",   "truck",  "traffic light", "stop sign"};
    return labels;
}

LabelInfo classify_label(const std::string& label) {
    if (label == "car") return {NodeType::Vehicle, 0};
    if (label == "person") return {NodeType::Person, 1};
    if (label == "bicycle") return {NodeType::Vehicle, 2};
    if (label == "motorcycle") return {NodeType::Vehicle, 3};
    if (label == "bus") return {NodeType::Vehicle, 4};
    if (label == "truck") return {NodeType::Vehicle, 5};
    if (label == "traffic light") return {NodeType::Static, 6};
    if (label == "stop sign") return {NodeType::Static, 7};
    throw DataError("unknown detection label '" + label + "'");
}

namespace {

constexpr int kGazeOneHot = 8;
constexpr int kStructureOneHot = 9;

Node blank_node(NodeType type, int t) {
    Node n;
    n.type = type;
    n.t = t;
    n.features.assign(kNodeFeatureDim, 0.0);
    return n;
}

}  // namespace

std::vector<Node> build_frame_nodes(const std::vector<Detection>& detections,
                                    const std::array<double, 128>& mask,
                                    std::pair<double, double> gaze, int t) {
    std::vector<Node> nodes;
    nodes.reserve(detections.size() + 2);

    for (size_t d = 0; d < detections.size(); ++d) {
        const Detection& det = detections[d];
        const LabelInfo info = classify_label(det.label);
        Node n = blank_node(info.type, t);
        n.det_index = static_cast<int>(d);
        n.features[kFeatX] = det.cx;
        n.features[kFeatY] = det.cy;
        n.features[kFeatW] = det.w;
        n.features[kFeatH] = det.h;
        n.features[kFeatScore] = det.score;
        if (!det.appearance.empty()) {
            if (det.appearance.size() != kAppearanceDim)
                throw DataError("appearance vector must have 128 entries");
            std::copy(det.appearance.begin(), det.appearance.end(),
                      n.features.begin() + kFeatAppearance);
        }
        n.features[kFeatDepth] = det.depth;
        n.features[kFeatOneHot + info.one_hot] = 1.0;
        nodes.push_back(std::move(n));
    }

    {
        Node n = blank_node(NodeType::Gaze, t);
        n.features[kFeatX] = gaze.first;
        n.features[kFeatY] = gaze.second;
        n.features[kFeatW] = 0.10;
        n.features[kFeatH] = 0.20;
        n.features[kFeatScore] = 1.0;
        n.features[kFeatOneHot + kGazeOneHot] = 1.0;
        nodes.push_back(std::move(n));
    }

    {
        Node n = blank_node(NodeType::Structure, t);
        // Appearance slot carries the flattened 16x8 mask; position is the
        // centroid of active cells, bbox their bounding box.
        double cx = 0, cy = 0;
        double min_x = 1, max_x = 0, min_y = 1, max_y = 0;
        int active = 0;
        for (size_t r = 0; r < kMaskH; ++r)
            for (size_t c = 0; c < kMaskW; ++c) {
                const double v = mask[r * kMaskW + c];
                n.features[kFeatAppearance + r * kMaskW + c] = v;
                if (v != 0.0) {
                    const double px = (static_cast<double>(c) + 0.5) /
                                      static_cast<double>(kMaskW);
                    const double py = (static_cast<double>(r) + 0.5) /
                                      static_cast<double>(kMaskH);
                    cx += px;
                    cy += py;
                    min_x = std::min(min_x, px);
                    max_x = std::max(max_x, px);
                    min_y = std::min(min_y, py);
                    max_y = std::max(max_y, py);
                    ++active;
                }
            }
        if (active > 0) {
            n.features[kFeatX] = cx / active;
            n.features[kFeatY] = cy / active;
            n.features[kFeatW] = max_x - min_x;
            n.features[kFeatH] = max_y - min_y;
        } else {
            n.features[kFeatX] = 0.5;
            n.features[kFeatY] = 0.5;
        }
        n.features[kFeatScore] = 1.0;
        n.features[kFeatOneHot + kStructureOneHot] = 1.0;
        nodes.push_back(std::move(n));
    }

    return nodes;
}

std::array<double, kEdgeFeatureDim> edge_affinity(const Node& src,
                                                  const Node& dst) {
    std::array<double, kEdgeFeatureDim> a{};
    a[0] = dst.features[kFeatX] - src.features[kFeatX];
    a[1] = dst.features[kFeatY] - src.features[kFeatY];
    a[2] = dst.features[kFeatDepth] - src.features[kFeatDepth];
    a[3] = static_cast<double>(dst.t - src.t);
    double dot = 0, ns = 0, nd = 0;
    for (size_t k = 0; k < kAppearanceDim; ++k) {
        const double s = src.features[kFeatAppearance + k];
        const double d = dst.features[kFeatAppearance + k];
        dot += s * d;
        ns += s * s;
        nd += d * d;
    }
    a[4] = (ns > 0.0 && nd > 0.0) ? dot / (std::sqrt(ns) * std::sqrt(nd)) : 0.0;
    return a;
}

void connect_edges(SceneGraph& g, const std::vector<int>& t_offsets) {
    g.edges.clear();
    std::vector<int> offsets = t_offsets;
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

    for (int t = 1; t <= g.T; ++t) {
        const auto [lo, hi] = g.step_range(t);
        for (int i = lo; i < hi; ++i)
            for (int j = lo; j < hi; ++j) {
                if (i == j) continue;
                Edge e;
                e.src = i;
                e.dst = j;
                e.temporal = false;
                e.affinity = edge_affinity(g.nodes[i], g.nodes[j]);
                g.edges.push_back(e);
            }
    }
    for (int t = 1; t <= g.T; ++t) {
        for (int dt : offsets) {
            const int ts = t - dt;
            if (ts < 1) continue;
            const auto [slo, shi] = g.step_range(ts);
            const auto [dlo, dhi] = g.step_range(t);
            for (int i = slo; i < shi; ++i)
                for (int j = dlo; j < dhi; ++j) {
                    Edge e;
                    e.src = i;
                    e.dst = j;
                    e.temporal = true;
                    e.affinity = edge_affinity(g.nodes[i], g.nodes[j]);
                    g.edges.push_back(e);
                }
        }
    }
}

SceneGraph assemble_window_graph(const std::vector<FrameData>& frames, int T,
                                 const std::vector<int>& t_offsets) {
    if (static_cast<int>(frames.size()) != T)
        throw DataError("window assembly needs exactly T frames");
    SceneGraph g;
    g.T = T;
    g.step_begin.assign(T + 1, 0);
    for (int t = 1; t <= T; ++t) {
        const FrameData& f = frames[t - 1];
        if (!f.gaze)
            throw DataError("missing gaze sample at window timestep " +
                            std::to_string(t));
        auto nodes = build_frame_nodes(f.detections, f.mask, *f.gaze, t);
        for (auto& n : nodes) {
            n.id = static_cast<int>(g.nodes.size());
            g.nodes.push_back(std::move(n));
        }
        g.step_begin[t] = static_cast<int>(g.nodes.size());
    }
    connect_edges(g, t_offsets);
    return g;
}

SceneGraph advance_window(const SceneGraph& g, const FrameData& new_frame,
                          std::pair<double, double> sampled_gaze,
                          const std::vector<int>& t_offsets) {
    SceneGraph out;
    out.T = g.T;
    out.frame_w = g.frame_w;
    out.frame_h = g.frame_h;
    out.step_begin.assign(g.T + 1, 0);

    for (int t = 2; t <= g.T; ++t) {
        const auto [lo, hi] = g.step_range(t);
        for (int i = lo; i < hi; ++i) {
            Node n = g.nodes[i];
            n.t = t - 1;
            n.id = static_cast<int>(out.nodes.size());
            out.nodes.push_back(std::move(n));
        }
        out.step_begin[t - 1] = static_cast<int>(out.nodes.size());
    }

    const std::pair<double, double> gaze = {
        std::clamp(sampled_gaze.first, 0.0, 1.0),
        std::clamp(sampled_gaze.second, 0.0, 1.0)};
    auto nodes = build_frame_nodes(new_frame.detections, new_frame.mask, gaze,
                                   g.T);
    for (auto& n : nodes) {
        n.id = static_cast<int>(out.nodes.size());
        out.nodes.push_back(std::move(n));
    }
    out.step_begin[g.T] = static_cast<int>(out.nodes.size());
    connect_edges(out, t_offsets);
    return out;
}

}  // namespace gazesim
