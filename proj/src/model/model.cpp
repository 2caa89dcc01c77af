#include <cmath>
#include <limits>

#include "gazesim/model/model.hpp"

namespace gazesim {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Binds ParamStore tensors to tape nodes, once per name per forward pass.
class Binder {
public:
    Binder(Tape& t, ParamStore& ps, bool train,
           std::map<std::string, Id>* out)
        : t_(t), ps_(ps), train_(train), out_(out) {}

    Id operator()(const std::string& name, size_t rows, size_t cols,
                  Init init) {
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        Tensor& v = ps_.get_or_create(name, rows, cols, init);
        const Id id = train_ ? t_.leaf(v) : t_.constant(v);
        ids_.emplace(name, id);
        if (out_) out_->emplace(name, id);
        return id;
    }

private:
    Tape& t_;
    ParamStore& ps_;
    bool train_;
    std::map<std::string, Id>* out_;
    std::map<std::string, Id> ids_;
};

Tensor ones_col(size_t n) {
    Tensor t(n, 1);
    for (double& x : t.data) x = 1.0;
    return t;
}

}  // namespace

GazeModel::GazeModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(seed) {
    if (cfg_.d % 2 != 0) throw ConfigError("model dim d must be even");
    if (cfg_.d < 2 || cfg_.L < 0) throw ConfigError("bad model dimensions");
    if (cfg_.variant != "art" && cfg_.variant != "hgt")
        throw ConfigError("processor variant must be art or hgt");
    if (cfg_.head != "odn" && cfg_.head != "mdn")
        throw ConfigError("head must be odn or mdn");
    if (cfg_.heads != 1)
        throw ConfigError("only single-head attention is supported");
}

GazeModel::Forward GazeModel::forward(Tape& t, const GraphBatch& batch,
                                      bool training, bool update_stats,
                                      std::map<std::string, Id>* param_ids) {
    Binder bind(t, params_, training, param_ids);
    const size_t N = batch.n_nodes();
    const size_t E = batch.n_edges();
    const size_t d = static_cast<size_t>(cfg_.d);

    auto bn = [&](Id x, const std::string& prefix, size_t width) {
        const Id gamma = bind(prefix + ".gamma", 1, width, Init::Ones);
        const Id beta = bind(prefix + ".beta", 1, width, Init::Zeros);
        Tensor& rm = params_.get_or_create(prefix + ".running_mean", 1, width,
                                           Init::Zeros);
        Tensor& rv = params_.get_or_create(prefix + ".running_var", 1, width,
                                           Init::Ones);
        return batch_norm(t, x, gamma, beta, rm, rv, training, update_stats);
    };

    // per-node-type affine applied to rows of input, reassembled over N rows
    auto typed_affine = [&](Id input, const std::string& mid, size_t in_dim,
                            size_t out_dim) {
        std::vector<Id> parts;
        std::vector<std::vector<int>> part_idx;
        for (int ti = 0; ti < kNodeTypeCount; ++ti) {
            const auto& idx = batch.nodes_of_type[ti];
            if (idx.empty()) continue;
            const std::string& ty = node_type_name(static_cast<NodeType>(ti));
            const Id w =
                bind(mid + "." + ty + ".W", in_dim, out_dim, Init::KaimingUniform);
            const Id b = bind(mid + "." + ty + ".b", 1, out_dim, Init::Zeros);
            const Id rows = gather_rows(t, input, idx);
            parts.push_back(add_rowvec(t, matmul(t, rows, w), b));
            part_idx.push_back(idx);
        }
        return scatter_add_parts(t, parts, std::move(part_idx), N);
    };

    const Id x_raw = t.constant(batch.node_feats);
    const Id a_raw = t.constant(batch.edge_feats);
    const Id x_bn = bn(x_raw, "input_bn.node", kNodeFeatureDim);
    Id a_bn = -1;
    if (E > 0) a_bn = bn(a_raw, "input_bn.edge", kEdgeFeatureDim);

    Id h = typed_affine(x_bn, "embed", kNodeFeatureDim, d);
    h = add(t, h, t.constant(time_encoding(batch.node_time, d)));

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    for (int l = 0; l < cfg_.L; ++l) {
        const std::string bp = "block" + std::to_string(l);

        const Id h1 = layer_norm(t, h, bind(bp + ".ln1.gamma", 1, d, Init::Ones),
                                 bind(bp + ".ln1.beta", 1, d, Init::Zeros));

        const Id qkv = typed_affine(h1, bp + ".qkv", d, 3 * d);
        const Id Q = slice_cols(t, qkv, 0, d);
        const Id Kn = slice_cols(t, qkv, d, 2 * d);
        const Id Vn = slice_cols(t, qkv, 2 * d, 3 * d);

        Id agg;
        if (E > 0) {
            std::vector<Id> kparts, vparts;
            std::vector<std::vector<int>> eidx;
            for (const auto& [phi, edge_idx] : batch.edges_of_phi) {
                std::vector<int> srcs(edge_idx.size());
                for (size_t i = 0; i < edge_idx.size(); ++i)
                    srcs[i] = batch.edge_src[edge_idx[i]];
                const Id wk =
                    bind(bp + ".edge." + phi + ".WK", d, d, Init::KaimingUniform);
                const Id wv =
                    bind(bp + ".edge." + phi + ".WV", d, d, Init::KaimingUniform);
                kparts.push_back(matmul(t, gather_rows(t, Kn, srcs), wk));
                vparts.push_back(matmul(t, gather_rows(t, Vn, srcs), wv));
                eidx.push_back(edge_idx);
            }
            Id Ke = scatter_add_parts(t, kparts, eidx, E);
            Id Ve = scatter_add_parts(t, vparts, std::move(eidx), E);
            if (cfg_.variant == "art") {
                auto affinity_embed = [&](const std::string& enc) {
                    const Id w1 = bind(bp + "." + enc + ".W1", kEdgeFeatureDim,
                                       d, Init::KaimingUniform);
                    const Id b1 = bind(bp + "." + enc + ".b1", 1, d, Init::Zeros);
                    const Id pre = add_rowvec(t, matmul(t, a_bn, w1), b1);
                    const Id normed = [&] {
                        const std::string prefix = bp + "." + enc + ".bn";
                        const Id gamma = bind(prefix + ".gamma", 1, d, Init::Ones);
                        const Id beta = bind(prefix + ".beta", 1, d, Init::Zeros);
                        Tensor& rm = params_.get_or_create(
                            prefix + ".running_mean", 1, d, Init::Zeros);
                        Tensor& rv = params_.get_or_create(
                            prefix + ".running_var", 1, d, Init::Ones);
                        return batch_norm(t, pre, gamma, beta, rm, rv, training,
                                          update_stats);
                    }();
                    const Id w2 = bind(bp + "." + enc + ".W2", d, d,
                                       Init::KaimingUniform);
                    return matmul(t, relu(t, normed), w2);
                };
                Ke = add(t, Ke, affinity_embed("affK"));
                Ve = add(t, Ve, affinity_embed("affV"));
            }
            const Id Qe = gather_rows(t, Q, batch.edge_dst);
            const Id scores = scale(t, row_dot(t, Qe, Ke), inv_sqrt_d);
            const Id alpha = segment_softmax(t, scores, batch.dst_segs);
            const Id msgs = scale_rows(t, Ve, alpha);
            agg = scatter_add_rows(t, msgs, batch.edge_dst, N);
        } else {
            agg = t.constant(Tensor(N, d));
        }

        auto gate_col = [&](const std::string& role) {
            std::vector<Id> parts;
            std::vector<std::vector<int>> part_idx;
            for (int ti = 0; ti < kNodeTypeCount; ++ti) {
                const auto& idx = batch.nodes_of_type[ti];
                if (idx.empty()) continue;
                const std::string& ty =
                    node_type_name(static_cast<NodeType>(ti));
                const Id free =
                    bind(bp + ".gate." + ty + "." + role, 1, 1, Init::Zeros);
                const Id lam = sigmoid(t, free);
                parts.push_back(
                    scale_by_scalar(t, t.constant(ones_col(idx.size())), lam));
                part_idx.push_back(idx);
            }
            return scatter_add_parts(t, parts, std::move(part_idx), N);
        };
        auto gated = [&](Id lam_col, Id u, Id skip) {
            const Id one_minus =
                add_const(t, neg(t, lam_col), 1.0);
            return add(t, scale_rows(t, u, lam_col),
                       scale_rows(t, skip, one_minus));
        };

        const Id y1 = gated(gate_col("art"), agg, h);

        const Id h2 = layer_norm(t, y1, bind(bp + ".ln2.gamma", 1, d, Init::Ones),
                                 bind(bp + ".ln2.beta", 1, d, Init::Zeros));

        std::vector<Id> ffn_parts;
        std::vector<std::vector<int>> ffn_idx;
        const size_t hid = static_cast<size_t>(cfg_.ffn_hidden);
        for (int ti = 0; ti < kNodeTypeCount; ++ti) {
            const auto& idx = batch.nodes_of_type[ti];
            if (idx.empty()) continue;
            const std::string& ty = node_type_name(static_cast<NodeType>(ti));
            const std::string fp = bp + ".ffn." + ty;
            const Id w1 = bind(fp + ".W1", d, hid, Init::KaimingUniform);
            const Id b1 = bind(fp + ".b1", 1, hid, Init::Zeros);
            const Id w2 = bind(fp + ".W2", hid, d, Init::KaimingUniform);
            const Id b2 = bind(fp + ".b2", 1, d, Init::Zeros);
            const Id rows = gather_rows(t, h2, idx);
            const Id mid = relu(t, add_rowvec(t, matmul(t, rows, w1), b1));
            ffn_parts.push_back(add_rowvec(t, matmul(t, mid, w2), b2));
            ffn_idx.push_back(idx);
        }
        const Id ffn = scatter_add_parts(t, ffn_parts, std::move(ffn_idx), N);

        h = gated(gate_col("ffn"), ffn, y1);
    }

    Forward f;
    f.repr = h;
    f.comp_segs = batch.comp_segs;

    Id raw;  // [K x 6] mixture head output
    if (cfg_.head == "odn") {
        f.comp_graph = batch.comp_graph;
        f.comp_node = batch.comp_node;
        f.comp_det_index = batch.comp_det_index;
        f.comp_type = batch.comp_type;
        const size_t K = batch.n_comps();

        std::array<std::vector<int>, kNodeTypeCount> comp_pos;
        for (size_t c = 0; c < K; ++c)
            comp_pos[static_cast<int>(batch.comp_type[c])].push_back(
                static_cast<int>(c));

        std::vector<Id> head_parts;
        std::vector<std::vector<int>> head_idx;
        for (int ti = 0; ti < kNodeTypeCount; ++ti) {
            const auto& pos = comp_pos[ti];
            if (pos.empty()) continue;
            const std::string& ty = node_type_name(static_cast<NodeType>(ti));
            const Id w =
                bind("odn." + ty + ".W", d, 6, Init::KaimingUniform);
            const Id b = bind("odn." + ty + ".b", 1, 6, Init::Zeros);
            std::vector<int> node_rows(pos.size());
            for (size_t i = 0; i < pos.size(); ++i)
                node_rows[i] = batch.comp_node[pos[i]];
            const Id rows = gather_rows(t, h, node_rows);
            head_parts.push_back(add_rowvec(t, matmul(t, rows, w), b));
            head_idx.push_back(pos);
        }
        raw = scatter_add_parts(t, head_parts, std::move(head_idx), K);
    } else {
        // fixed-K head: mean-pool last-timestep nodes per graph
        const int G = batch.n_graphs;
        const int K_fixed = cfg_.mdn_k;
        if (K_fixed < 1) throw ConfigError("mdn_k must be >= 1");
        const Id last_rows = gather_rows(t, h, batch.comp_node);
        const Id sums = segment_sum(t, last_rows, batch.comp_segs);
        Tensor inv_counts(G, 1);
        {
            std::vector<int> counts(G, 0);
            for (int g : batch.comp_graph) ++counts[g];
            for (int g = 0; g < G; ++g) {
                if (counts[g] == 0)
                    throw DimError("graph with empty final timestep");
                inv_counts.data[g] = 1.0 / counts[g];
            }
        }
        const Id pooled = scale_rows(t, sums, t.constant(inv_counts));
        const Id w = bind("mdn.W", d, static_cast<size_t>(6 * K_fixed),
                          Init::KaimingUniform);
        const Id b = bind("mdn.b", 1, static_cast<size_t>(6 * K_fixed),
                          Init::Zeros);
        const Id all = add_rowvec(t, matmul(t, pooled, w), b);  // [G x 6K]
        raw = -1;
        std::vector<int> comp_graph(static_cast<size_t>(G) * K_fixed);
        for (int k = 0; k < K_fixed; ++k) {
            const Id block = slice_cols(t, all, 6 * k, 6 * k + 6);
            std::vector<int> target(G);
            for (int g = 0; g < G; ++g) {
                target[g] = g * K_fixed + k;
                comp_graph[static_cast<size_t>(g) * K_fixed + k] = g;
            }
            const Id sc = scatter_add_rows(t, block, target,
                                           static_cast<size_t>(G) * K_fixed);
            raw = raw < 0 ? sc : add(t, raw, sc);
        }
        f.comp_graph = std::move(comp_graph);
        f.comp_node.assign(f.comp_graph.size(), -1);
        f.comp_det_index.assign(f.comp_graph.size(), -1);
        f.comp_type.assign(f.comp_graph.size(), NodeType::Gaze);
        f.comp_segs = Segments::from_ids(f.comp_graph, G);
    }

    const size_t K = f.comp_graph.size();
    const Id dxh = slice_cols(t, raw, 0, 1);
    const Id dyh = slice_cols(t, raw, 1, 2);
    const Id sxh = slice_cols(t, raw, 2, 3);
    const Id syh = slice_cols(t, raw, 3, 4);
    const Id rhoh = slice_cols(t, raw, 4, 5);
    const Id pih = slice_cols(t, raw, 5, 6);

    // mixing weights: per-graph log-softmax
    const Id lse = segment_logsumexp(t, pih, f.comp_segs);
    f.log_pi = sub(t, pih, gather_rows(t, lse, f.comp_graph));
    f.rho = tanh_(t, rhoh);
    f.sx = exp_(t, sxh);
    f.sy = exp_(t, syh);

    // mean offset: clamped to +-delta_max except where unclamped (structure
    // nodes; every mdn component)
    Tensor unclamped(K, 1);
    Tensor anchor_x(K, 1), anchor_y(K, 1);
    for (size_t c = 0; c < K; ++c) {
        const bool un = cfg_.head == "mdn" || f.comp_type[c] == NodeType::Structure;
        unclamped.data[c] = un ? 1.0 : 0.0;
        anchor_x.data[c] = cfg_.head == "mdn" ? 0.0 : batch.mu0x[c];
        anchor_y.data[c] = cfg_.head == "mdn" ? 0.0 : batch.mu0y[c];
    }
    const Id mask = t.constant(unclamped);
    const Id inv_mask = t.constant([&] {
        Tensor m(K, 1);
        for (size_t c = 0; c < K; ++c) m.data[c] = 1.0 - unclamped.data[c];
        return m;
    }());
    auto squash_mu = [&](Id rawcol, const Tensor& anchor) {
        const Id clamped = scale(t, tanh_(t, rawcol), cfg_.delta_max);
        const Id delta =
            add(t, mul(t, mask, rawcol), mul(t, inv_mask, clamped));
        return add(t, delta, t.constant(anchor));
    };
    f.mux = squash_mu(dxh, anchor_x);
    f.muy = squash_mu(dyh, anchor_y);
    return f;
}

Id GazeModel::nll(Tape& t, const Forward& f,
                  const std::vector<std::pair<double, double>>& targets) const {
    const size_t K = f.comp_graph.size();
    Tensor tx(K, 1), ty(K, 1);
    for (size_t c = 0; c < K; ++c) {
        const int g = f.comp_graph[c];
        if (g < 0 || static_cast<size_t>(g) >= targets.size())
            throw DimError("nll: one target per graph required");
        tx.data[c] = targets[g].first;
        ty.data[c] = targets[g].second;
    }
    const Id zx = div_(t, sub(t, t.constant(tx), f.mux), f.sx);
    const Id zy = div_(t, sub(t, t.constant(ty), f.muy), f.sy);
    Tensor ones(K, 1);
    for (double& v : ones.data) v = 1.0;
    const Id omr2 = sub(t, t.constant(ones), mul(t, f.rho, f.rho));
    const Id quad =
        sub(t, add(t, mul(t, zx, zx), mul(t, zy, zy)),
            scale(t, mul(t, mul(t, f.rho, zx), zy), 2.0));
    const Id log_norm = add(
        t, add(t, log_(t, f.sx), log_(t, f.sy)),
        scale(t, log_(t, omr2), 0.5));
    const Id log_n = add_const(
        t, neg(t, add(t, log_norm, div_(t, quad, scale(t, omr2, 2.0)))),
        -kLog2Pi);
    const Id log_mix = add(t, f.log_pi, log_n);
    const Id ll = clamp_min(t, segment_logsumexp(t, log_mix, f.comp_segs),
                            -745.0);
    return neg(t, mean(t, ll));
}

GmmPrediction GazeModel::predict(const SceneGraph& g) {
    Tape t;
    const GraphBatch batch = merge_graphs({&g});
    const Forward f = forward(t, batch, false, false);
    GmmPrediction pred;
    const size_t K = f.comp_graph.size();
    pred.comps.resize(K);
    for (size_t c = 0; c < K; ++c) {
        GmmComponent& cm = pred.comps[c];
        cm.pi = std::exp(t.val(f.log_pi).data[c]);
        cm.mux = t.val(f.mux).data[c];
        cm.muy = t.val(f.muy).data[c];
        cm.sx = t.val(f.sx).data[c];
        cm.sy = t.val(f.sy).data[c];
        cm.rho = t.val(f.rho).data[c];
        cm.node_id = f.comp_node[c];
        cm.det_index = f.comp_det_index[c];
        cm.type = f.comp_type[c];
    }
    return pred;
}

double gmm_log_density(const GmmPrediction& pred, double x, double y) {
    double m = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(pred.comps.size());
    for (size_t k = 0; k < pred.comps.size(); ++k) {
        const GmmComponent& c = pred.comps[k];
        if (!(std::fabs(c.rho) < 1.0))
            throw DataError("gmm component correlation out of (-1,1)");
        if (!(c.sx > 0.0) || !(c.sy > 0.0))
            throw DataError("gmm component sigma must be positive");
        const double zx = (x - c.mux) / c.sx;
        const double zy = (y - c.muy) / c.sy;
        const double omr2 = 1.0 - c.rho * c.rho;
        const double quad = (zx * zx - 2.0 * c.rho * zx * zy + zy * zy) / omr2;
        const double logn = -kLog2Pi - std::log(c.sx) - std::log(c.sy) -
                            0.5 * std::log(omr2) - 0.5 * quad;
        terms[k] = std::log(c.pi) + logn;
        m = std::max(m, terms[k]);
    }
    if (!std::isfinite(m)) return -745.0;
    double z = 0.0;
    for (double v : terms) z += std::exp(v - m);
    return std::max(m + std::log(z), -745.0);
}

double gmm_density(const GmmPrediction& pred, double x, double y) {
    return std::exp(gmm_log_density(pred, x, y));
}

std::pair<double, double> sample_gaze(const GmmPrediction& pred, Rng& rng) {
    if (pred.comps.empty()) throw DimError("sampling from empty mixture");
    const double u = rng.uniform();
    double acc = 0.0;
    size_t pick = pred.comps.size() - 1;
    for (size_t k = 0; k < pred.comps.size(); ++k) {
        acc += pred.comps[k].pi;
        if (u < acc) {
            pick = k;
            break;
        }
    }
    const GmmComponent& c = pred.comps[pick];
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double x = c.mux + c.sx * z1;
    const double y =
        c.muy + c.sy * (c.rho * z1 + std::sqrt(1.0 - c.rho * c.rho) * z2);
    return {x, y};
}

}  // namespace gazesim
