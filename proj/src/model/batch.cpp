#include "gazesim/model/model.hpp"

namespace gazesim {

std::string phi_key(NodeType src, bool temporal, NodeType dst) {
    return node_type_name(src) + (temporal ? ":temporal:" : ":spatial:") +
           node_type_name(dst);
}

GraphBatch merge_graphs(const std::vector<const SceneGraph*>& graphs) {
    if (graphs.empty()) throw DimError("merge_graphs: empty batch");
    GraphBatch b;
    b.n_graphs = static_cast<int>(graphs.size());

    size_t total_nodes = 0, total_edges = 0;
    for (const SceneGraph* g : graphs) {
        total_nodes += g->nodes.size();
        total_edges += g->edges.size();
    }
    b.node_feats = Tensor(total_nodes, kNodeFeatureDim);
    b.edge_feats = Tensor(total_edges, kEdgeFeatureDim);
    b.node_type.reserve(total_nodes);
    b.node_time.reserve(total_nodes);
    b.node_graph.reserve(total_nodes);
    b.edge_src.reserve(total_edges);
    b.edge_dst.reserve(total_edges);

    std::vector<int> edge_phi_ids;  // temp per-edge key index into map later
    size_t node_off = 0, edge_row = 0;
    for (int gi = 0; gi < b.n_graphs; ++gi) {
        const SceneGraph& g = *graphs[gi];
        for (const Node& n : g.nodes) {
            const size_t row = node_off + static_cast<size_t>(n.id);
            std::copy(n.features.begin(), n.features.end(),
                      b.node_feats.row(row));
            b.node_type.push_back(n.type);
            b.node_time.push_back(static_cast<double>(n.t));
            b.node_graph.push_back(gi);
            b.nodes_of_type[static_cast<int>(n.type)].push_back(
                static_cast<int>(row));
        }
        for (const Edge& e : g.edges) {
            std::copy(e.affinity.begin(), e.affinity.end(),
                      b.edge_feats.row(edge_row));
            const int src = static_cast<int>(node_off) + e.src;
            const int dst = static_cast<int>(node_off) + e.dst;
            b.edge_src.push_back(src);
            b.edge_dst.push_back(dst);
            b.edges_of_phi[phi_key(g.nodes[e.src].type, e.temporal,
                                   g.nodes[e.dst].type)]
                .push_back(static_cast<int>(edge_row));
            ++edge_row;
        }
        const auto [lo, hi] = g.step_range(g.T);
        for (int i = lo; i < hi; ++i) {
            const Node& n = g.nodes[i];
            b.comp_node.push_back(static_cast<int>(node_off) + n.id);
            b.comp_graph.push_back(gi);
            b.comp_type.push_back(n.type);
            b.comp_det_index.push_back(n.det_index);
            b.mu0x.push_back(n.features[kFeatX]);
            b.mu0y.push_back(n.features[kFeatY]);
        }
        node_off += g.nodes.size();
    }

    b.dst_segs =
        Segments::from_ids(b.edge_dst, static_cast<int>(total_nodes));
    b.comp_segs = Segments::from_ids(b.comp_graph, b.n_graphs);
    return b;
}

}  // namespace gazesim
