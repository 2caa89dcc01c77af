#pragma once

#include <vector>

#include "gazesim/core/tape.hpp"

namespace gazesim {

// Elements grouped by segment, CSR-style. `index` holds element ids ordered
// by segment; segment s owns index[offsets[s]..offsets[s+1]).
struct Segments {
    std::vector<int> offsets;
    std::vector<int> index;
    int n_segs() const { return static_cast<int>(offsets.size()) - 1; }
    static Segments from_ids(const std::vector<int>& ids, int n_segs);
};

Id matmul(Tape& t, Id a, Id b);
Id add(Tape& t, Id a, Id b);
Id sub(Tape& t, Id a, Id b);
Id mul(Tape& t, Id a, Id b);
Id div_(Tape& t, Id a, Id b);
Id add_rowvec(Tape& t, Id a, Id v);  // v [1 x q] broadcast over rows of a
Id scale(Tape& t, Id a, double c);
Id add_const(Tape& t, Id a, double c);
Id neg(Tape& t, Id a);
Id exp_(Tape& t, Id a);
Id log_(Tape& t, Id a);
Id tanh_(Tape& t, Id a);
Id sigmoid(Tape& t, Id a);
Id relu(Tape& t, Id a);
Id sqrt_(Tape& t, Id a);
Id clamp_min(Tape& t, Id a, double floor);
Id sum(Tape& t, Id a);        // -> 1x1
Id mean(Tape& t, Id a);       // -> 1x1
Id row_sum(Tape& t, Id a);    // [n x q] -> [n x 1]
Id col_mean(Tape& t, Id a);   // [n x q] -> [1 x q]
Id row_dot(Tape& t, Id a, Id b);  // [n x q],[n x q] -> [n x 1]
Id gather_rows(Tape& t, Id a, std::vector<int> idx);
// out[idx[r]] += a[r]; idx values in [0, n_out)
Id scatter_add_rows(Tape& t, Id a, std::vector<int> idx, size_t n_out);
// out[idx[p][r]] += val(parts[p])[r] for every part; one tape node total,
// so assembling an output from many row blocks does not materialize a full
// intermediate per block.
Id scatter_add_parts(Tape& t, const std::vector<Id>& parts,
                     std::vector<std::vector<int>> idx, size_t n_out);
Id slice_cols(Tape& t, Id a, size_t c0, size_t c1);
Id scale_rows(Tape& t, Id a, Id s);       // s [n x 1]
Id scale_by_scalar(Tape& t, Id a, Id s);  // s 1x1

// a [n x q] -> [S x q], per-segment row sums
Id segment_sum(Tape& t, Id a, const Segments& segs);
// a [n x 1] -> [n x 1], softmax within each segment (max-shifted)
Id segment_softmax(Tape& t, Id a, const Segments& segs);
// a [n x 1] -> [S x 1], log sum exp within each segment (max-shifted)
Id segment_logsumexp(Tape& t, Id a, const Segments& segs);

Id layer_norm(Tape& t, Id x, Id gamma, Id beta, double eps = 1e-5);

// Column-wise batch norm. In training mode statistics come from the batch
// (requires >= 2 rows) and, when update_stats is set, running stats are
// updated in place with the given momentum (unbiased variance, torch
// convention). In inference mode running stats are used and never touched.
Id batch_norm(Tape& t, Id x, Id gamma, Id beta, Tensor& running_mean,
              Tensor& running_var, bool training, bool update_stats,
              double momentum = 0.1, double eps = 1e-5);

// Sinusoidal encoding, pairs interleaved per frequency: column 2k holds
// sin(t / 10000^{2k/d}), column 2k+1 the matching cos. d must be even.
Tensor time_encoding(const std::vector<double>& timesteps, size_t d);

}  // namespace gazesim
