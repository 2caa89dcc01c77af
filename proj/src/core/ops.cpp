#include "gazesim/core/ops.hpp"

#include <cmath>
#include <limits>

#include "gazesim/kernels/kernels.hpp"

namespace gazesim {

namespace K = gazesim::kernels;

Segments Segments::from_ids(const std::vector<int>& ids, int n_segs) {
    Segments s;
    s.offsets.assign(static_cast<size_t>(n_segs) + 1, 0);
    for (int id : ids) {
        if (id < 0 || id >= n_segs) throw DimError("segment id out of range");
        ++s.offsets[static_cast<size_t>(id) + 1];
    }
    for (int i = 0; i < n_segs; ++i) s.offsets[i + 1] += s.offsets[i];
    s.index.resize(ids.size());
    std::vector<int> cursor(s.offsets.begin(), s.offsets.end() - 1);
    for (size_t i = 0; i < ids.size(); ++i)
        s.index[static_cast<size_t>(cursor[ids[i]]++)] = static_cast<int>(i);
    return s;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw DimError(std::string(op) + ": shape mismatch");
}

}  // namespace

Id matmul(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    if (av.cols != bv.rows) throw DimError("matmul: inner dims differ");
    Tensor out(av.rows, bv.cols);
    K::active().matmul_nn(av.ptr(), bv.ptr(), out.ptr(), av.rows, av.cols, bv.cols);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        if (t.requires_grad(a)) {
            Tensor bt = transpose(bv);
            K::active().matmul_nn_acc(g.ptr(), bt.ptr(), t.grad(a).ptr(),
                                      g.rows, g.cols, bt.cols);
        }
        if (t.requires_grad(b))
            K::active().matmul_tn_acc(av.ptr(), g.ptr(), t.grad(b).ptr(),
                                      av.rows, av.cols, g.cols);
    });
}

Id add(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    check_same_shape(av, bv, "add");
    Tensor out(av.rows, av.cols);
    K::active().add(av.ptr(), bv.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a))
            K::active().add_inplace(t.grad(a).ptr(), g.ptr(), g.size());
        if (t.requires_grad(b))
            K::active().add_inplace(t.grad(b).ptr(), g.ptr(), g.size());
    });
}

Id sub(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    check_same_shape(av, bv, "sub");
    Tensor out(av.rows, av.cols);
    K::active().sub(av.ptr(), bv.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a))
            K::active().add_inplace(t.grad(a).ptr(), g.ptr(), g.size());
        if (t.requires_grad(b))
            K::active().axpy(-1.0, g.ptr(), t.grad(b).ptr(), g.size());
    });
}

Id mul(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    check_same_shape(av, bv, "mul");
    Tensor out(av.rows, av.cols);
    K::active().mul(av.ptr(), bv.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        Tensor tmp(g.rows, g.cols);
        if (t.requires_grad(a)) {
            K::active().mul(g.ptr(), t.val(b).ptr(), tmp.ptr(), g.size());
            K::active().add_inplace(t.grad(a).ptr(), tmp.ptr(), g.size());
        }
        if (t.requires_grad(b)) {
            K::active().mul(g.ptr(), t.val(a).ptr(), tmp.ptr(), g.size());
            K::active().add_inplace(t.grad(b).ptr(), tmp.ptr(), g.size());
        }
    });
}

Id div_(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    check_same_shape(av, bv, "div");
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] / bv.data[i];
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& bv = t.val(b);
        const Tensor& ov = t.val(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / bv.data[i];
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (size_t i = 0; i < g.size(); ++i)
                gb.data[i] -= g.data[i] * ov.data[i] / bv.data[i];
        }
    });
}

Id add_rowvec(Tape& t, Id a, Id v) {
    const Tensor& av = t.val(a);
    const Tensor& vv = t.val(v);
    if (vv.rows != 1 || vv.cols != av.cols)
        throw DimError("add_rowvec: vector must be 1 x cols(a)");
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < av.rows; ++i)
        K::active().add(av.row(i), vv.ptr(), out.row(i), av.cols);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, v}, [a, v, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a))
            K::active().add_inplace(t.grad(a).ptr(), g.ptr(), g.size());
        if (t.requires_grad(v)) {
            Tensor& gv = t.grad(v);
            for (size_t i = 0; i < g.rows; ++i)
                K::active().add_inplace(gv.ptr(), g.row(i), g.cols);
        }
    });
}

Id scale(Tape& t, Id a, double c) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    K::active().scale(c, av.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, c, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a))
            K::active().axpy(c, g.ptr(), t.grad(a).ptr(), g.size());
    });
}

Id add_const(Tape& t, Id a, double c) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + c;
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a))
            K::active().add_inplace(t.grad(a).ptr(), g.ptr(), g.size());
    });
}

Id neg(Tape& t, Id a) { return scale(t, a, -1.0); }

Id exp_(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::exp(av.data[i]);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        if (t.requires_grad(a)) {
            Tensor tmp(g.rows, g.cols);
            K::active().mul(g.ptr(), ov.ptr(), tmp.ptr(), g.size());
            K::active().add_inplace(t.grad(a).ptr(), tmp.ptr(), g.size());
        }
    });
}

Id log_(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::log(av.data[i]);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / av.data[i];
        }
    });
}

Id tanh_(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(av.data[i]);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                ga.data[i] += g.data[i] * (1.0 - ov.data[i] * ov.data[i]);
        }
    });
}

Id sigmoid(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = av.data[i];
        out.data[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                               : std::exp(x) / (1.0 + std::exp(x));
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                ga.data[i] += g.data[i] * ov.data[i] * (1.0 - ov.data[i]);
        }
    });
}

Id relu(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    K::active().relu(av.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        if (t.requires_grad(a)) {
            Tensor tmp(g.rows, g.cols);
            K::active().relu_bwd(av.ptr(), g.ptr(), tmp.ptr(), g.size());
            K::active().add_inplace(t.grad(a).ptr(), tmp.ptr(), g.size());
        }
    });
}

Id sqrt_(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::sqrt(av.data[i]);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                ga.data[i] += 0.5 * g.data[i] / ov.data[i];
        }
    });
}

Id clamp_min(Tape& t, Id a, double floor) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = av.data[i] > floor ? av.data[i] : floor;
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, floor, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.size(); ++i)
                if (av.data[i] > floor) ga.data[i] += g.data[i];
        }
    });
}

Id sum(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    double s = 0.0;
    for (double x : av.data) s += x;
    const Id o = static_cast<Id>(t.size());
    return t.make(Tensor::scalar(s), {a}, [a, o](Tape& t) {
        const double g = t.grad(o).data[0];
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (double& x : ga.data) x += g;
        }
    });
}

Id mean(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    if (av.size() == 0) throw DimError("mean of empty tensor");
    double s = 0.0;
    for (double x : av.data) s += x;
    const double inv = 1.0 / static_cast<double>(av.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(Tensor::scalar(s * inv), {a}, [a, inv, o](Tape& t) {
        const double g = t.grad(o).data[0] * inv;
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (double& x : ga.data) x += g;
        }
    });
}

Id row_sum(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    Tensor out(av.rows, 1);
    for (size_t i = 0; i < av.rows; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < av.cols; ++j) s += av.data[i * av.cols + j];
        out.data[i] = s;
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < ga.rows; ++i)
                for (size_t j = 0; j < ga.cols; ++j)
                    ga.data[i * ga.cols + j] += g.data[i];
        }
    });
}

Id col_mean(Tape& t, Id a) {
    const Tensor& av = t.val(a);
    if (av.rows == 0) throw DimError("col_mean of empty tensor");
    Tensor out(1, av.cols);
    for (size_t i = 0; i < av.rows; ++i)
        K::active().add_inplace(out.ptr(), av.row(i), av.cols);
    const double inv = 1.0 / static_cast<double>(av.rows);
    K::active().scale(inv, out.ptr(), out.ptr(), out.cols);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, inv, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < ga.rows; ++i)
                K::active().axpy(inv, g.ptr(), ga.row(i), ga.cols);
        }
    });
}

Id row_dot(Tape& t, Id a, Id b) {
    const Tensor& av = t.val(a);
    const Tensor& bv = t.val(b);
    check_same_shape(av, bv, "row_dot");
    Tensor out(av.rows, 1);
    for (size_t i = 0; i < av.rows; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < av.cols; ++j)
            s += av.data[i * av.cols + j] * bv.data[i * av.cols + j];
        out.data[i] = s;
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, b}, [a, b, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < av.rows; ++i)
                K::active().axpy(g.data[i], bv.row(i), ga.row(i), av.cols);
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad(b);
            for (size_t i = 0; i < av.rows; ++i)
                K::active().axpy(g.data[i], av.row(i), gb.row(i), av.cols);
        }
    });
}

Id gather_rows(Tape& t, Id a, std::vector<int> idx) {
    const Tensor& av = t.val(a);
    Tensor out(idx.size(), av.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
        const int i = idx[r];
        if (i < 0 || static_cast<size_t>(i) >= av.rows)
            throw DimError("gather_rows: index out of range");
        std::copy(av.row(i), av.row(i) + av.cols, out.row(r));
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a},
                  [a, o, idx = std::move(idx)](Tape& t) {
                      const Tensor& g = t.grad(o);
                      if (t.requires_grad(a)) {
                          Tensor& ga = t.grad(a);
                          for (size_t r = 0; r < idx.size(); ++r)
                              K::active().add_inplace(ga.row(idx[r]), g.row(r),
                                                      g.cols);
                      }
                  });
}

Id scatter_add_rows(Tape& t, Id a, std::vector<int> idx, size_t n_out) {
    const Tensor& av = t.val(a);
    if (idx.size() != av.rows)
        throw DimError("scatter_add_rows: index count must match rows");
    Tensor out(n_out, av.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
        const int i = idx[r];
        if (i < 0 || static_cast<size_t>(i) >= n_out)
            throw DimError("scatter_add_rows: index out of range");
        K::active().add_inplace(out.row(i), av.row(r), av.cols);
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a},
                  [a, o, idx = std::move(idx)](Tape& t) {
                      const Tensor& g = t.grad(o);
                      if (t.requires_grad(a)) {
                          Tensor& ga = t.grad(a);
                          for (size_t r = 0; r < idx.size(); ++r)
                              K::active().add_inplace(ga.row(r), g.row(idx[r]),
                                                      g.cols);
                      }
                  });
}

Id scatter_add_parts(Tape& t, const std::vector<Id>& parts,
                     std::vector<std::vector<int>> idx, size_t n_out) {
    if (parts.empty() || parts.size() != idx.size())
        throw DimError("scatter_add_parts: parts/index list size mismatch");
    const size_t cols = t.val(parts[0]).cols;
    Tensor out(n_out, cols);
    for (size_t p = 0; p < parts.size(); ++p) {
        const Tensor& av = t.val(parts[p]);
        if (av.cols != cols)
            throw DimError("scatter_add_parts: column count mismatch");
        if (idx[p].size() != av.rows)
            throw DimError("scatter_add_parts: index count must match rows");
        for (size_t r = 0; r < idx[p].size(); ++r) {
            const int i = idx[p][r];
            if (i < 0 || static_cast<size_t>(i) >= n_out)
                throw DimError("scatter_add_parts: index out of range");
            K::active().add_inplace(out.row(i), av.row(r), av.cols);
        }
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), parts,
                  [parts, o, idx = std::move(idx)](Tape& t) {
                      const Tensor& g = t.grad(o);
                      for (size_t p = 0; p < parts.size(); ++p) {
                          if (!t.requires_grad(parts[p])) continue;
                          Tensor& ga = t.grad(parts[p]);
                          for (size_t r = 0; r < idx[p].size(); ++r)
                              K::active().add_inplace(
                                  ga.row(r), g.row(idx[p][r]), g.cols);
                      }
                  });
}

Id slice_cols(Tape& t, Id a, size_t c0, size_t c1) {
    const Tensor& av = t.val(a);
    if (c0 >= c1 || c1 > av.cols) throw DimError("slice_cols: bad range");
    Tensor out(av.rows, c1 - c0);
    for (size_t i = 0; i < av.rows; ++i)
        std::copy(av.row(i) + c0, av.row(i) + c1, out.row(i));
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, c0, o](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < g.rows; ++i)
                K::active().add_inplace(ga.row(i) + c0, g.row(i), g.cols);
        }
    });
}

Id scale_rows(Tape& t, Id a, Id s) {
    const Tensor& av = t.val(a);
    const Tensor& sv = t.val(s);
    if (sv.cols != 1 || sv.rows != av.rows)
        throw DimError("scale_rows: scale must be [rows x 1]");
    Tensor out(av.rows, av.cols);
    for (size_t i = 0; i < av.rows; ++i)
        K::active().scale(sv.data[i], av.row(i), out.row(i), av.cols);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, s}, [a, s, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        const Tensor& sv = t.val(s);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (size_t i = 0; i < av.rows; ++i)
                K::active().axpy(sv.data[i], g.row(i), ga.row(i), av.cols);
        }
        if (t.requires_grad(s)) {
            Tensor& gs = t.grad(s);
            for (size_t i = 0; i < av.rows; ++i) {
                double acc = 0.0;
                for (size_t j = 0; j < av.cols; ++j)
                    acc += g.data[i * av.cols + j] * av.data[i * av.cols + j];
                gs.data[i] += acc;
            }
        }
    });
}

Id scale_by_scalar(Tape& t, Id a, Id s) {
    const Tensor& av = t.val(a);
    const Tensor& sv = t.val(s);
    if (sv.size() != 1) throw DimError("scale_by_scalar: scale must be 1x1");
    Tensor out(av.rows, av.cols);
    K::active().scale(sv.data[0], av.ptr(), out.ptr(), out.size());
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a, s}, [a, s, o](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& av = t.val(a);
        const Tensor& sv = t.val(s);
        if (t.requires_grad(a))
            K::active().axpy(sv.data[0], g.ptr(), t.grad(a).ptr(), g.size());
        if (t.requires_grad(s)) {
            double acc = 0.0;
            for (size_t i = 0; i < g.size(); ++i) acc += g.data[i] * av.data[i];
            t.grad(s).data[0] += acc;
        }
    });
}

Id segment_sum(Tape& t, Id a, const Segments& segs) {
    const Tensor& av = t.val(a);
    Tensor out(segs.n_segs(), av.cols);
    for (int s = 0; s < segs.n_segs(); ++s)
        for (int k = segs.offsets[s]; k < segs.offsets[s + 1]; ++k)
            K::active().add_inplace(out.row(s), av.row(segs.index[k]), av.cols);
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o, segs](Tape& t) {
        const Tensor& g = t.grad(o);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad(a);
            for (int s = 0; s < segs.n_segs(); ++s)
                for (int k = segs.offsets[s]; k < segs.offsets[s + 1]; ++k)
                    K::active().add_inplace(ga.row(segs.index[k]), g.row(s),
                                            g.cols);
        }
    });
}

Id segment_softmax(Tape& t, Id a, const Segments& segs) {
    const Tensor& av = t.val(a);
    if (av.cols != 1) throw DimError("segment_softmax expects a column");
    Tensor out(av.rows, 1);
    for (int s = 0; s < segs.n_segs(); ++s) {
        const int lo = segs.offsets[s], hi = segs.offsets[s + 1];
        if (lo == hi) continue;
        double m = -std::numeric_limits<double>::infinity();
        for (int k = lo; k < hi; ++k) m = std::max(m, av.data[segs.index[k]]);
        double z = 0.0;
        for (int k = lo; k < hi; ++k) {
            const double e = std::exp(av.data[segs.index[k]] - m);
            out.data[segs.index[k]] = e;
            z += e;
        }
        for (int k = lo; k < hi; ++k) out.data[segs.index[k]] /= z;
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o, segs](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        if (!t.requires_grad(a)) return;
        Tensor& ga = t.grad(a);
        for (int s = 0; s < segs.n_segs(); ++s) {
            const int lo = segs.offsets[s], hi = segs.offsets[s + 1];
            double dot = 0.0;
            for (int k = lo; k < hi; ++k) {
                const int e = segs.index[k];
                dot += g.data[e] * ov.data[e];
            }
            for (int k = lo; k < hi; ++k) {
                const int e = segs.index[k];
                ga.data[e] += ov.data[e] * (g.data[e] - dot);
            }
        }
    });
}

Id segment_logsumexp(Tape& t, Id a, const Segments& segs) {
    const Tensor& av = t.val(a);
    if (av.cols != 1) throw DimError("segment_logsumexp expects a column");
    Tensor out(segs.n_segs(), 1);
    for (int s = 0; s < segs.n_segs(); ++s) {
        const int lo = segs.offsets[s], hi = segs.offsets[s + 1];
        if (lo == hi) {
            out.data[s] = -std::numeric_limits<double>::infinity();
            continue;
        }
        double m = -std::numeric_limits<double>::infinity();
        for (int k = lo; k < hi; ++k) m = std::max(m, av.data[segs.index[k]]);
        double z = 0.0;
        for (int k = lo; k < hi; ++k) z += std::exp(av.data[segs.index[k]] - m);
        out.data[s] = m + std::log(z);
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {a}, [a, o, segs](Tape& t) {
        const Tensor& g = t.grad(o);
        const Tensor& ov = t.val(o);
        const Tensor& av = t.val(a);
        if (!t.requires_grad(a)) return;
        Tensor& ga = t.grad(a);
        for (int s = 0; s < segs.n_segs(); ++s) {
            for (int k = segs.offsets[s]; k < segs.offsets[s + 1]; ++k) {
                const int e = segs.index[k];
                ga.data[e] += g.data[s] * std::exp(av.data[e] - ov.data[s]);
            }
        }
    });
}

Id layer_norm(Tape& t, Id x, Id gamma, Id beta, double eps) {
    const Tensor& xv = t.val(x);
    const Tensor& gv = t.val(gamma);
    const Tensor& bv = t.val(beta);
    if (gv.rows != 1 || gv.cols != xv.cols || !gv.same_shape(bv))
        throw DimError("layer_norm: gamma/beta must be 1 x cols(x)");
    const size_t n = xv.rows, c = xv.cols;
    Tensor xhat(n, c);
    Tensor inv(n, 1);
    Tensor out(n, c);
    for (size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (size_t j = 0; j < c; ++j) mu += xv.data[i * c + j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (size_t j = 0; j < c; ++j) {
            const double d = xv.data[i * c + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        inv.data[i] = is;
        for (size_t j = 0; j < c; ++j) {
            const double xh = (xv.data[i * c + j] - mu) * is;
            xhat.data[i * c + j] = xh;
            out.data[i * c + j] = gv.data[j] * xh + bv.data[j];
        }
    }
    const Id o = static_cast<Id>(t.size());
    return t.make(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, o, xhat = std::move(xhat),
                   inv = std::move(inv)](Tape& t) {
                      const Tensor& g = t.grad(o);
                      const Tensor& gv = t.val(gamma);
                      const size_t n = g.rows, c = g.cols;
                      if (t.requires_grad(gamma)) {
                          Tensor& gg = t.grad(gamma);
                          for (size_t i = 0; i < n; ++i)
                              for (size_t j = 0; j < c; ++j)
                                  gg.data[j] += g.data[i * c + j] * xhat.data[i * c + j];
                      }
                      if (t.requires_grad(beta)) {
                          Tensor& gb = t.grad(beta);
                          for (size_t i = 0; i < n; ++i)
                              K::active().add_inplace(gb.ptr(), g.row(i), c);
                      }
                      if (t.requires_grad(x)) {
                          Tensor& gx = t.grad(x);
                          for (size_t i = 0; i < n; ++i) {
                              double m1 = 0.0, m2 = 0.0;
                              for (size_t j = 0; j < c; ++j) {
                                  const double dxh = g.data[i * c + j] * gv.data[j];
                                  m1 += dxh;
                                  m2 += dxh * xhat.data[i * c + j];
                              }
                              m1 /= static_cast<double>(c);
                              m2 /= static_cast<double>(c);
                              for (size_t j = 0; j < c; ++j) {
                                  const double dxh = g.data[i * c + j] * gv.data[j];
                                  gx.data[i * c + j] +=
                                      inv.data[i] *
                                      (dxh - m1 - xhat.data[i * c + j] * m2);
                              }
                          }
                      }
                  });
}

Id batch_norm(Tape& t, Id x, Id gamma, Id beta, Tensor& running_mean,
              Tensor& running_var, bool training, bool update_stats,
              double momentum, double eps) {
    const Tensor& xv = t.val(x);
    const Tensor& gv = t.val(gamma);
    const Tensor& bv = t.val(beta);
    const size_t n = xv.rows, c = xv.cols;
    if (gv.rows != 1 || gv.cols != c || !gv.same_shape(bv))
        throw DimError("batch_norm: gamma/beta must be 1 x cols(x)");
    if (running_mean.size() != c || running_var.size() != c)
        throw DimError("batch_norm: running stats must be 1 x cols(x)");

    Tensor xhat(n, c);
    Tensor inv(1, c);
    Tensor out(n, c);
    if (training) {
        if (n < 2) throw DimError("batch_norm: training mode needs >= 2 rows");
        Tensor mu(1, c), var(1, c);
        for (size_t i = 0; i < n; ++i)
            K::active().add_inplace(mu.ptr(), xv.row(i), c);
        K::active().scale(1.0 / static_cast<double>(n), mu.ptr(), mu.ptr(), c);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) {
                const double d = xv.data[i * c + j] - mu.data[j];
                var.data[j] += d * d;
            }
        K::active().scale(1.0 / static_cast<double>(n), var.ptr(), var.ptr(), c);
        for (size_t j = 0; j < c; ++j)
            inv.data[j] = 1.0 / std::sqrt(var.data[j] + eps);
        if (update_stats) {
            const double ub = static_cast<double>(n) / static_cast<double>(n - 1);
            for (size_t j = 0; j < c; ++j) {
                running_mean.data[j] =
                    (1.0 - momentum) * running_mean.data[j] + momentum * mu.data[j];
                running_var.data[j] = (1.0 - momentum) * running_var.data[j] +
                                      momentum * var.data[j] * ub;
            }
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) {
                const double xh = (xv.data[i * c + j] - mu.data[j]) * inv.data[j];
                xhat.data[i * c + j] = xh;
                out.data[i * c + j] = gv.data[j] * xh + bv.data[j];
            }
    } else {
        for (size_t j = 0; j < c; ++j)
            inv.data[j] = 1.0 / std::sqrt(running_var.data[j] + eps);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < c; ++j) {
                const double xh =
                    (xv.data[i * c + j] - running_mean.data[j]) * inv.data[j];
                xhat.data[i * c + j] = xh;
                out.data[i * c + j] = gv.data[j] * xh + bv.data[j];
            }
    }

    const Id o = static_cast<Id>(t.size());
    return t.make(
        std::move(out), {x, gamma, beta},
        [x, gamma, beta, o, training, xhat = std::move(xhat),
         inv = std::move(inv)](Tape& t) {
            const Tensor& g = t.grad(o);
            const Tensor& gv = t.val(gamma);
            const size_t n = g.rows, c = g.cols;
            if (t.requires_grad(gamma)) {
                Tensor& gg = t.grad(gamma);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < c; ++j)
                        gg.data[j] += g.data[i * c + j] * xhat.data[i * c + j];
            }
            if (t.requires_grad(beta)) {
                Tensor& gb = t.grad(beta);
                for (size_t i = 0; i < n; ++i)
                    K::active().add_inplace(gb.ptr(), g.row(i), c);
            }
            if (!t.requires_grad(x)) return;
            Tensor& gx = t.grad(x);
            if (training) {
                Tensor s1(1, c), s2(1, c);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < c; ++j) {
                        const double dxh = g.data[i * c + j] * gv.data[j];
                        s1.data[j] += dxh;
                        s2.data[j] += dxh * xhat.data[i * c + j];
                    }
                const double invn = 1.0 / static_cast<double>(n);
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < c; ++j) {
                        const double dxh = g.data[i * c + j] * gv.data[j];
                        gx.data[i * c + j] +=
                            inv.data[j] * (dxh - invn * s1.data[j] -
                                           xhat.data[i * c + j] * invn * s2.data[j]);
                    }
            } else {
                for (size_t i = 0; i < n; ++i)
                    for (size_t j = 0; j < c; ++j)
                        gx.data[i * c + j] +=
                            g.data[i * c + j] * gv.data[j] * inv.data[j];
            }
        });
}

Tensor time_encoding(const std::vector<double>& timesteps, size_t d) {
    if (d % 2 != 0) throw ConfigError("time encoding dimension must be even");
    Tensor out(timesteps.size(), d);
    for (size_t i = 0; i < timesteps.size(); ++i) {
        for (size_t k = 0; k < d / 2; ++k) {
            const double denom =
                std::pow(10000.0, 2.0 * static_cast<double>(k) /
                                      static_cast<double>(d));
            const double arg = timesteps[i] / denom;
            out.data[i * d + 2 * k] = std::sin(arg);
            out.data[i * d + 2 * k + 1] = std::cos(arg);
        }
    }
    return out;
}

}  // namespace gazesim
