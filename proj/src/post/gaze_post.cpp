#include "gazesim/post/gaze_post.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>

namespace gazesim {

namespace {

// scipy-style reflection: a b c d -> d c b a | a b c d | d c b a
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int m = 2 * n;
    i = ((i % m) + m) % m;
    return i < n ? i : m - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0;
    for (int j = -radius; j <= radius; ++j) {
        const double v = std::exp(-(j * j) / (2.0 * sigma * sigma));
        k[static_cast<size_t>(j + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

double parse_double(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str())
        throw DataError("bad number '" + s + "' in " + path);
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

GazeTrace preprocess_gaze(const GazeTrace& raw, double target_rate) {
    if (!(target_rate > 0)) throw ConfigError("target rate must be positive");
    const size_t n = raw.size();
    if (n < 2) throw DataError("gaze trace needs at least 2 samples");

    std::vector<size_t> valid;
    for (size_t i = 0; i < n; ++i)
        if (raw.is_valid(i) && std::isfinite(raw.x[i]) &&
            std::isfinite(raw.y[i]))
            valid.push_back(i);
    if (valid.size() < 2)
        throw DataError("gaze trace has fewer than 2 valid samples");

    std::vector<double> fx = raw.x, fy = raw.y;
    for (size_t i = 0; i < valid.front(); ++i) {
        fx[i] = fx[valid.front()];
        fy[i] = fy[valid.front()];
    }
    for (size_t i = valid.back() + 1; i < n; ++i) {
        fx[i] = fx[valid.back()];
        fy[i] = fy[valid.back()];
    }
    for (size_t v = 0; v + 1 < valid.size(); ++v) {
        const size_t a = valid[v], b = valid[v + 1];
        for (size_t i = a + 1; i < b; ++i) {
            const double u = static_cast<double>(i - a) /
                             static_cast<double>(b - a);
            fx[i] = (1.0 - u) * fx[a] + u * fx[b];
            fy[i] = (1.0 - u) * fy[a] + u * fy[b];
        }
    }

    GazeTrace out;
    out.rate = target_rate;
    out.t0 = raw.t0;
    const double duration = static_cast<double>(n - 1) / raw.rate;
    const size_t n_out =
        static_cast<size_t>(std::floor(duration * target_rate + 1e-9)) + 1;
    const double step = raw.rate / target_rate;
    for (size_t k = 0; k < n_out; ++k) {
        const double src = static_cast<double>(k) * step;
        size_t i0 = std::min(static_cast<size_t>(src), n - 2);
        const double u = src - static_cast<double>(i0);
        out.x.push_back((1.0 - u) * fx[i0] + u * fx[i0 + 1]);
        out.y.push_back((1.0 - u) * fy[i0] + u * fy[i0 + 1]);
    }
    return out;
}

std::vector<Fixation> detect_fixations(const GazeTrace& g,
                                       const FixationParams& p) {
    if (!(p.t1 > 0) || !(p.t2 > 0) || !(p.min_dur > 0))
        throw ConfigError("fixation thresholds must be positive");
    const size_t n = g.size();
    std::vector<Fixation> out;
    if (n == 0) return out;
    for (size_t i = 0; i < n; ++i)
        if (!g.is_valid(i) || !std::isfinite(g.x[i]) || !std::isfinite(g.y[i]))
            throw DataError("fixation detection sample " + std::to_string(i) +
                            " is invalid; preprocess the trace first");

    const double period = 1.0 / g.rate;

    auto flush = [&](size_t begin, size_t end) {  // cluster [begin, end)
        const size_t m = end - begin;
        double mx = 0, my = 0;
        for (size_t i = begin; i < end; ++i) {
            mx += g.x[i];
            my += g.y[i];
        }
        mx /= static_cast<double>(m);
        my /= static_cast<double>(m);
        double kx = 0, ky = 0;
        size_t kept = 0;
        size_t first_kept = end;
        for (size_t i = begin; i < end; ++i) {
            if (std::hypot(g.x[i] - mx, g.y[i] - my) > p.t2) continue;
            kx += g.x[i];
            ky += g.y[i];
            if (first_kept == end) first_kept = i;
            ++kept;
        }
        if (kept == 0) return;
        const double dur = static_cast<double>(kept) * period;
        if (dur + 1e-9 < p.min_dur) return;
        out.push_back({g.t_at(first_kept), dur,
                       kx / static_cast<double>(kept),
                       ky / static_cast<double>(kept)});
    };

    size_t start = 0;
    double sx = g.x[0], sy = g.y[0];
    for (size_t i = 1; i < n; ++i) {
        const double count = static_cast<double>(i - start);
        const double d =
            std::hypot(g.x[i] - sx / count, g.y[i] - sy / count);
        if (d <= p.t1) {
            sx += g.x[i];
            sy += g.y[i];
        } else {
            flush(start, i);
            start = i;
            sx = g.x[i];
            sy = g.y[i];
        }
    }
    flush(start, n);
    return out;
}

Tensor build_saliency_map(const std::vector<Fixation>& fixations,
                          const SaliencyParams& p) {
    if (p.width < 1 || p.height < 1)
        throw ConfigError("saliency grid must be at least 1x1");
    if (!(p.sigma_base > 0)) throw ConfigError("sigma must be positive");
    const int w = p.width, h = p.height;
    Tensor grid(static_cast<size_t>(h), static_cast<size_t>(w));
    for (const auto& f : fixations) {
        if (!std::isfinite(f.x) || !std::isfinite(f.y))
            throw DataError("fixation centroid is not finite");
        const long c = std::clamp(std::lround(f.x * (w - 1)), 0L,
                                  static_cast<long>(w - 1));
        const long r = std::clamp(std::lround(f.y * (h - 1)), 0L,
                                  static_cast<long>(h - 1));
        grid.data[static_cast<size_t>(r) * static_cast<size_t>(w) +
                  static_cast<size_t>(c)] += 1.0;
    }

    const double sigma = p.sigma_base * (static_cast<double>(w) / 640.0);
    const auto kernel = gaussian_kernel(sigma);
    const int radius = (static_cast<int>(kernel.size()) - 1) / 2;

    Tensor tmp(grid.rows, grid.cols);
    for (int r = 0; r < h; ++r) {  // horizontal pass
        for (int c = 0; c < w; ++c) {
            double acc = 0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[static_cast<size_t>(j + radius)] *
                       grid.data[static_cast<size_t>(r) * w +
                                 static_cast<size_t>(reflect_index(c + j, w))];
            tmp.data[static_cast<size_t>(r) * w + static_cast<size_t>(c)] = acc;
        }
    }
    for (int c = 0; c < w; ++c) {  // vertical pass
        for (int r = 0; r < h; ++r) {
            double acc = 0;
            for (int j = -radius; j <= radius; ++j)
                acc += kernel[static_cast<size_t>(j + radius)] *
                       tmp.data[static_cast<size_t>(reflect_index(r + j, h)) * w +
                                static_cast<size_t>(c)];
            grid.data[static_cast<size_t>(r) * w + static_cast<size_t>(c)] = acc;
        }
    }

    const double peak = *std::max_element(grid.data.begin(), grid.data.end());
    if (peak > 0)
        for (double& v : grid.data) v /= peak;
    return grid;
}

std::vector<ObjectSalience> rank_object_salience(
    const std::vector<Rollout>& runs) {
    if (runs.empty()) throw DataError("object salience needs at least one run");
    const size_t steps = runs[0].mixtures.size();
    if (steps == 0)
        throw DataError(
            "runs carry no recorded mixtures; simulate with mixture "
            "recording enabled");
    for (const auto& r : runs)
        if (r.mixtures.size() != steps)
            throw DataError("runs disagree on generated step count");

    std::vector<ObjectSalience> out(steps);
    for (size_t s = 0; s < steps; ++s) {
        std::map<int, double> mass;  // det_index -> summed mixture weight
        for (const auto& r : runs)
            for (const auto& c : r.mixtures[s].comps) {
                if (c.type == NodeType::Gaze || c.type == NodeType::Structure)
                    continue;
                mass[c.det_index] += c.pi;
            }
        if (mass.empty()) continue;
        double vmax = -std::numeric_limits<double>::infinity();
        for (const auto& [idx, v] : mass) vmax = std::max(vmax, v);
        double z = 0;
        for (const auto& [idx, v] : mass) z += std::exp(v - vmax);
        double top = 0;
        std::vector<double> soft;
        for (const auto& [idx, v] : mass) {
            out[s].det_index.push_back(idx);
            soft.push_back(std::exp(v - vmax) / z);
            top = std::max(top, soft.back());
        }
        for (double v : soft) out[s].score.push_back(v / top);
    }
    return out;
}

void save_fixations_csv(const std::string& path,
                        const std::vector<Fixation>& fixations) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write fixations csv '" + path + "'");
    out << "onset_sec,duration_sec,x,y\n";
    char buf[200];
    for (const auto& f : fixations) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", f.onset,
                      f.duration, f.x, f.y);
        out << buf;
    }
    if (!out) throw DataError("failed writing fixations csv '" + path + "'");
}

std::vector<Fixation> load_fixations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open fixations csv '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty fixations csv " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "onset_sec,duration_sec,x,y")
        throw DataError("fixations csv " + path +
                        " must start with header onset_sec,duration_sec,x,y");
    std::vector<Fixation> out;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 4)
            throw DataError("fixations csv " + path + " row needs 4 fields");
        out.push_back({parse_double(f[0], path), parse_double(f[1], path),
                       parse_double(f[2], path), parse_double(f[3], path)});
    }
    return out;
}

void save_grid_csv(const std::string& path, const Tensor& grid) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write grid csv '" + path + "'");
    char buf[40];
    for (size_t r = 0; r < grid.rows; ++r) {
        for (size_t c = 0; c < grid.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", grid.data[r * grid.cols + c]);
            out << buf << (c + 1 == grid.cols ? "\n" : ",");
        }
    }
    if (!out) throw DataError("failed writing grid csv '" + path + "'");
}

Tensor load_grid_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid csv '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& s : split_csv(line)) row.push_back(parse_double(s, path));
        if (!rows.empty() && row.size() != rows[0].size())
            throw DataError("grid csv " + path + " has ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("grid csv " + path + " is empty");
    Tensor t(rows.size(), rows[0].size());
    for (size_t r = 0; r < rows.size(); ++r)
        for (size_t c = 0; c < rows[r].size(); ++c)
            t.data[r * t.cols + c] = rows[r][c];
    return t;
}

void save_pgm(const std::string& path, const Tensor& grid) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write pgm '" + path + "'");
    out << "P2\n" << grid.cols << " " << grid.rows << "\n255\n";
    for (size_t r = 0; r < grid.rows; ++r) {
        for (size_t c = 0; c < grid.cols; ++c) {
            const double v = std::clamp(grid.data[r * grid.cols + c], 0.0, 1.0);
            out << std::lround(v * 255.0) << (c + 1 == grid.cols ? "\n" : " ");
        }
    }
    if (!out) throw DataError("failed writing pgm '" + path + "'");
}

}  // namespace gazesim
