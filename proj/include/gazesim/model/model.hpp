#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "gazesim/core/adam.hpp"
#include "gazesim/core/ops.hpp"
#include "gazesim/core/params.hpp"
#include "gazesim/graph/types.hpp"

namespace gazesim {

struct ModelConfig {
    int d = 128;
    int L = 2;
    int ffn_hidden = 256;
    int heads = 1;                 // single-head attention
    std::string variant = "art";   // art | hgt
    std::string head = "odn";      // odn | mdn
    int mdn_k = 10;
    double delta_max = 0.05;
    int T = 20;
    std::vector<int> t_offsets = {1, 2, 4, 8, 16};
};

// Several disjoint graphs merged into one flat node/edge set so a whole
// training batch shares one tape (and batch-norm statistics span the batch).
struct GraphBatch {
    Tensor node_feats;  // [N x 144]
    Tensor edge_feats;  // [E x 5]
    std::vector<NodeType> node_type;
    std::vector<double> node_time;  // window-relative timestep per node
    std::vector<int> edge_src, edge_dst;
    std::vector<int> node_graph;
    int n_graphs = 0;

    // Node indices of the final timestep of each graph, in graph order;
    // these back the mixture components.
    std::vector<int> comp_node;
    std::vector<int> comp_graph;
    std::vector<NodeType> comp_type;
    std::vector<int> comp_det_index;
    std::vector<double> mu0x, mu0y;  // component anchors (node positions)

    Segments dst_segs;   // edges grouped by destination node
    Segments comp_segs;  // components grouped by graph
    std::array<std::vector<int>, kNodeTypeCount> nodes_of_type;
    std::map<std::string, std::vector<int>> edges_of_phi;

    size_t n_nodes() const { return node_type.size(); }
    size_t n_edges() const { return edge_src.size(); }
    size_t n_comps() const { return comp_node.size(); }
};

GraphBatch merge_graphs(const std::vector<const SceneGraph*>& graphs);
std::string phi_key(NodeType src, bool temporal, NodeType dst);

struct GmmComponent {
    double pi = 0, mux = 0, muy = 0, sx = 1, sy = 1, rho = 0;
    int node_id = -1;
    int det_index = -1;
    NodeType type = NodeType::Gaze;
};

struct GmmPrediction {
    std::vector<GmmComponent> comps;
};

double gmm_log_density(const GmmPrediction& pred, double x, double y);
double gmm_density(const GmmPrediction& pred, double x, double y);
std::pair<double, double> sample_gaze(const GmmPrediction& pred, Rng& rng);

class GazeModel {
public:
    GazeModel(ModelConfig cfg, std::uint64_t seed);

    struct Forward {
        Id repr = -1;  // [N x d]
        // mixture parameters, one row per component
        Id log_pi = -1, mux = -1, muy = -1, sx = -1, sy = -1, rho = -1;
        // for the mdn head components are (graph, k) pairs instead of nodes
        std::vector<int> comp_graph;
        std::vector<int> comp_node;       // -1 for mdn
        std::vector<int> comp_det_index;  // -1 for mdn
        std::vector<NodeType> comp_type;
        Segments comp_segs;
    };

    // Runs processor + head over the merged batch. In training mode
    // parameters become differentiable tape leaves, recorded in param_ids
    // (name -> tape id) for gradient extraction.
    Forward forward(Tape& t, const GraphBatch& batch, bool training,
                    bool update_stats,
                    std::map<std::string, Id>* param_ids = nullptr);

    // Mean clamped negative log likelihood over the batch, one target
    // position per graph.
    Id nll(Tape& t, const Forward& f,
           const std::vector<std::pair<double, double>>& targets) const;

    // Inference convenience for a single graph.
    GmmPrediction predict(const SceneGraph& g);

    ModelConfig& config() { return cfg_; }
    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

private:
    ModelConfig cfg_;
    ParamStore params_;
};

void save_checkpoint(const std::string& path, const GazeModel& model);
GazeModel load_checkpoint(const std::string& path);

}  // namespace gazesim
