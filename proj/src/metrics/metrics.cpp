#include "gazesim/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gazesim {

namespace {

void require_clean(const GazeTrace& t, const char* what) {
    for (size_t i = 0; i < t.size(); ++i)
        if (!t.is_valid(i) || !std::isfinite(t.x[i]) || !std::isfinite(t.y[i]))
            throw DataError(std::string(what) + " needs fully valid traces; "
                            "sample " + std::to_string(i) + " is not");
}

std::vector<double> resample_to(const std::vector<double>& v, size_t len) {
    if (v.size() == len) return v;
    std::vector<double> out(len);
    const double stride = static_cast<double>(v.size() - 1) /
                          static_cast<double>(len - 1);
    for (size_t k = 0; k < len; ++k) {
        const double src = static_cast<double>(k) * stride;
        const size_t i0 = std::min(static_cast<size_t>(src), v.size() - 2);
        const double u = src - static_cast<double>(i0);
        out[k] = (1.0 - u) * v[i0] + u * v[i0 + 1];
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0, va = 0, vb = 0;
    for (size_t i = 0; i < n; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    if (va <= 0 || vb <= 0)
        throw DataError("correlation undefined for a zero-variance coordinate");
    return cov / std::sqrt(va * vb);
}

std::pair<long, long> fixation_pixel(const Fixation& f, size_t w, size_t h) {
    const long c = std::clamp(std::lround(f.x * static_cast<double>(w - 1)), 0L,
                              static_cast<long>(w - 1));
    const long r = std::clamp(std::lround(f.y * static_cast<double>(h - 1)), 0L,
                              static_cast<long>(h - 1));
    return {r, c};
}

}  // namespace

double dtw(const GazeTrace& a, const GazeTrace& b, double scale_w,
           double scale_h) {
    if (a.size() == 0 || b.size() == 0)
        throw DataError("dtw needs nonempty traces");
    require_clean(a, "dtw");
    require_clean(b, "dtw");
    const size_t n = a.size(), m = b.size();
    auto cost = [&](size_t i, size_t j) {
        return std::hypot((a.x[i] - b.x[j]) * scale_w,
                          (a.y[i] - b.y[j]) * scale_h);
    };
    std::vector<double> prev(m), cur(m);
    prev[0] = cost(0, 0);
    for (size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + cost(0, j);
    for (size_t i = 1; i < n; ++i) {
        cur[0] = prev[0] + cost(i, 0);
        for (size_t j = 1; j < m; ++j)
            cur[j] = cost(i, j) + std::min({prev[j], cur[j - 1], prev[j - 1]});
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

double temporal_correlation(const GazeTrace& a, const GazeTrace& b) {
    if (a.size() < 2 || b.size() < 2)
        throw DataError("temporal correlation needs at least 2 samples");
    require_clean(a, "temporal correlation");
    require_clean(b, "temporal correlation");
    const size_t len = std::max(a.size(), b.size());
    const auto ax = resample_to(a.x, len), ay = resample_to(a.y, len);
    const auto bx = resample_to(b.x, len), by = resample_to(b.y, len);
    return 0.5 * (pearson(ax, bx) + pearson(ay, by));
}

std::vector<int> scanpath_tokens(const GazeTrace& t) {
    require_clean(t, "scanpath tokenization");
    std::vector<int> out(t.size());
    for (size_t i = 0; i < t.size(); ++i) {
        const int col = std::clamp(
            static_cast<int>(std::floor(t.x[i] * static_cast<double>(kMaskW))),
            0, static_cast<int>(kMaskW) - 1);
        const int row = std::clamp(
            static_cast<int>(std::floor(t.y[i] * static_cast<double>(kMaskH))),
            0, static_cast<int>(kMaskH) - 1);
        out[i] = row * static_cast<int>(kMaskW) + col;
    }
    return out;
}

int levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

int levenshtein_scanpath(const GazeTrace& a, const GazeTrace& b) {
    return levenshtein(scanpath_tokens(a), scanpath_tokens(b));
}

PairStats pair_best_match(
    const std::vector<GazeTrace>& gen, const std::vector<GazeTrace>& ref,
    const std::function<double(const GazeTrace&, const GazeTrace&)>& metric,
    bool lower_better, bool leave_one_out) {
    if (gen.empty() || ref.empty())
        throw DataError("pair matching needs nonempty trace sets");
    if (leave_one_out && (gen.size() != ref.size() || gen.size() < 2))
        throw DataError(
            "leave-one-out matching needs the reference set itself with at "
            "least 2 traces");
    PairStats s;
    for (size_t i = 0; i < gen.size(); ++i) {
        double best = lower_better ? std::numeric_limits<double>::infinity()
                                   : -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < ref.size(); ++j) {
            if (leave_one_out && i == j) continue;
            const double v = metric(gen[i], ref[j]);
            best = lower_better ? std::min(best, v) : std::max(best, v);
        }
        s.best.push_back(best);
    }
    for (double v : s.best) s.mean += v;
    s.mean /= static_cast<double>(s.best.size());
    if (s.best.size() > 1) {
        double acc = 0;
        for (double v : s.best) acc += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(s.best.size() - 1));
    }
    return s;
}

FixationStats fixation_stats(const std::vector<Fixation>& fixations,
                             double duration_sec) {
    if (!(duration_sec > 0))
        throw DataError("fixation stats need a positive trace duration");
    FixationStats s;
    s.count = static_cast<int>(fixations.size());
    s.rate = static_cast<double>(s.count) / duration_sec;
    if (fixations.empty()) return s;
    double md = 0;
    for (const auto& f : fixations) md += f.duration;
    md /= static_cast<double>(fixations.size());
    s.mean_duration = md;
    if (fixations.size() > 1) {
        double acc = 0;
        for (const auto& f : fixations)
            acc += (f.duration - md) * (f.duration - md);
        s.std_duration =
            std::sqrt(acc / static_cast<double>(fixations.size() - 1));
        double amp = 0;
        for (size_t i = 0; i + 1 < fixations.size(); ++i)
            amp += std::hypot(fixations[i + 1].x - fixations[i].x,
                              fixations[i + 1].y - fixations[i].y);
        s.mean_saccade_amp = amp / static_cast<double>(fixations.size() - 1);
    }
    return s;
}

std::optional<double> aoi_tff(const std::vector<Fixation>& fixations,
                              double aoi_x, double aoi_y, double radius) {
    if (!(radius > 0)) throw ConfigError("aoi radius must be positive");
    std::optional<double> first;
    for (const auto& f : fixations) {
        if (std::hypot(f.x - aoi_x, f.y - aoi_y) > radius) continue;
        if (!first || f.onset < *first) first = f.onset;
    }
    return first;
}

double nss(const Tensor& saliency, const std::vector<Fixation>& fixations) {
    if (saliency.data.empty()) throw DimError("empty saliency map");
    if (fixations.empty()) throw DataError("nss needs at least one fixation");
    const double n = static_cast<double>(saliency.data.size());
    double mean = 0;
    for (double v : saliency.data) mean += v;
    mean /= n;
    double var = 0;
    for (double v : saliency.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0)) throw DataError("nss undefined for a flat saliency map");
    double z = 0;
    for (const auto& f : fixations) {
        const auto [r, c] = fixation_pixel(f, saliency.cols, saliency.rows);
        z += (saliency.data[static_cast<size_t>(r) * saliency.cols +
                            static_cast<size_t>(c)] -
              mean) /
             sd;
    }
    return z / static_cast<double>(fixations.size());
}

Tensor fit_gaussian_baseline(const std::vector<Fixation>& fixations, int width,
                             int height) {
    if (fixations.empty())
        throw DataError("baseline fit needs at least one fixation");
    if (width < 1 || height < 1)
        throw ConfigError("baseline grid must be at least 1x1");
    double mx = 0, my = 0;
    for (const auto& f : fixations) {
        mx += f.x;
        my += f.y;
    }
    mx /= static_cast<double>(fixations.size());
    my /= static_cast<double>(fixations.size());
    double vx = 0, vy = 0;
    for (const auto& f : fixations) {
        vx += (f.x - mx) * (f.x - mx);
        vy += (f.y - my) * (f.y - my);
    }
    const double sx =
        std::max(std::sqrt(vx / static_cast<double>(fixations.size())), 0.01);
    const double sy =
        std::max(std::sqrt(vy / static_cast<double>(fixations.size())), 0.01);

    Tensor grid(static_cast<size_t>(height), static_cast<size_t>(width));
    double sum = 0;
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            const double px = (c + 0.5) / static_cast<double>(width);
            const double py = (r + 0.5) / static_cast<double>(height);
            const double dx = (px - mx) / sx, dy = (py - my) / sy;
            const double v = std::exp(-0.5 * (dx * dx + dy * dy));
            grid.data[static_cast<size_t>(r) * static_cast<size_t>(width) +
                      static_cast<size_t>(c)] = v;
            sum += v;
        }
    for (double& v : grid.data) v /= sum;
    return grid;
}

double information_gain(const Tensor& saliency, const Tensor& baseline,
                        const std::vector<Fixation>& fixations) {
    if (saliency.rows != baseline.rows || saliency.cols != baseline.cols)
        throw DimError("saliency and baseline grids differ in shape");
    if (fixations.empty())
        throw DataError("information gain needs at least one fixation");
    double ssum = 0, bsum = 0;
    for (double v : saliency.data) ssum += v;
    for (double v : baseline.data) bsum += v;
    if (!(ssum > 0) || !(bsum > 0))
        throw DataError("cannot normalize an all-zero map");
    constexpr double kEps = 1e-12;
    double ig = 0;
    for (const auto& f : fixations) {
        const auto [r, c] = fixation_pixel(f, saliency.cols, saliency.rows);
        const size_t at =
            static_cast<size_t>(r) * saliency.cols + static_cast<size_t>(c);
        ig += std::log2(saliency.data[at] / ssum + kEps) -
              std::log2(baseline.data[at] / bsum + kEps);
    }
    return ig / static_cast<double>(fixations.size());
}

double auc_judd(const Tensor& saliency,
                const std::vector<Fixation>& fixations) {
    if (saliency.data.empty()) throw DimError("empty saliency map");
    if (fixations.empty()) throw DataError("auc needs at least one fixation");
    std::vector<double> fix_vals;
    for (const auto& f : fixations) {
        const auto [r, c] = fixation_pixel(f, saliency.cols, saliency.rows);
        fix_vals.push_back(saliency.data[static_cast<size_t>(r) * saliency.cols +
                                         static_cast<size_t>(c)]);
    }
    std::set<double, std::greater<double>> thresholds(fix_vals.begin(),
                                                      fix_vals.end());
    const double nf = static_cast<double>(fix_vals.size());
    const double np = static_cast<double>(saliency.data.size());
    std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};
    for (double th : thresholds) {
        double tp = 0, fp = 0;
        for (double v : fix_vals)
            if (v >= th) ++tp;
        for (double v : saliency.data)
            if (v >= th) ++fp;
        pts.emplace_back(fp / np, tp / nf);
    }
    pts.emplace_back(1.0, 1.0);
    double auc = 0;
    for (size_t i = 1; i < pts.size(); ++i)
        auc += 0.5 * (pts[i].second + pts[i - 1].second) *
               (pts[i].first - pts[i - 1].first);
    return auc;
}

GazeDynamics gaze_state_dynamics(
    const std::vector<GazeTrace>& traces,
    const std::vector<std::vector<double>>& event_times,
    double half_window_sec) {
    if (traces.empty()) throw DataError("gaze dynamics need at least one trace");
    if (traces.size() != event_times.size())
        throw DimError("one event list per trace required");
    if (!(half_window_sec > 0))
        throw ConfigError("dynamics window must be positive");
    const double rate = traces[0].rate;
    for (const auto& t : traces) {
        if (t.rate != rate)
            throw DataError("gaze dynamics need a single common sample rate");
        require_clean(t, "gaze dynamics");
    }
    const long w = std::lround(half_window_sec * rate);
    GazeDynamics out;
    out.offset_sec.resize(static_cast<size_t>(2 * w + 1));
    out.mean_disp.assign(static_cast<size_t>(2 * w + 1), 0.0);
    for (long o = -w; o <= w; ++o)
        out.offset_sec[static_cast<size_t>(o + w)] =
            static_cast<double>(o) / rate;

    for (size_t ti = 0; ti < traces.size(); ++ti) {
        const auto& tr = traces[ti];
        const long n = static_cast<long>(tr.size());
        for (double tau : event_times[ti]) {
            const long i0 = std::lround((tau - tr.t0) * rate);
            if (i0 - w < 0 || i0 + w > n - 2) continue;  // window leaves trace
            ++out.events_used;
            for (long o = -w; o <= w; ++o) {
                const size_t k = static_cast<size_t>(i0 + o);
                out.mean_disp[static_cast<size_t>(o + w)] +=
                    std::hypot(tr.x[k + 1] - tr.x[k], tr.y[k + 1] - tr.y[k]);
            }
        }
    }
    if (out.events_used == 0)
        throw DataError("no events fall fully inside the traces");
    for (double& v : out.mean_disp) v /= static_cast<double>(out.events_used);
    return out;
}

Psd residual_psd(const std::vector<GazeTrace>& traces) {
    if (traces.size() < 2)
        throw DataError("residual spectrum needs at least 2 traces");
    const size_t n = traces[0].size();
    const double rate = traces[0].rate;
    if (n < 8) throw DataError("traces too short for spectral analysis");
    for (const auto& t : traces) {
        if (t.size() != n || t.rate != rate)
            throw DataError(
                "residual spectrum needs equal-length traces at one rate");
        require_clean(t, "residual spectrum");
    }

    std::vector<double> mean_x(n, 0.0), mean_y(n, 0.0);
    for (const auto& t : traces)
        for (size_t i = 0; i < n; ++i) {
            mean_x[i] += t.x[i];
            mean_y[i] += t.y[i];
        }
    for (size_t i = 0; i < n; ++i) {
        mean_x[i] /= static_cast<double>(traces.size());
        mean_y[i] /= static_cast<double>(traces.size());
    }

    const size_t seg = std::min<size_t>(256, n / 2);
    const size_t hop = seg / 2;
    std::vector<double> window(seg);
    double u = 0;  // window power, sum w^2
    for (size_t j = 0; j < seg; ++j) {
        window[j] = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(j) /
                                          static_cast<double>(seg - 1)));
        u += window[j] * window[j];
    }
    const size_t half = seg / 2;  // one-sided bins 1..half, DC dropped

    Psd psd;
    for (size_t k = 1; k <= half; ++k)
        psd.freq.push_back(static_cast<double>(k) * rate /
                           static_cast<double>(seg));
    psd.power.assign(half, 0.0);

    std::vector<double> r(n), buf(seg);
    for (const auto& t : traces) {
        for (size_t i = 0; i < n; ++i)
            r[i] = std::hypot(t.x[i] - mean_x[i], t.y[i] - mean_y[i]);
        std::vector<double> acc(half, 0.0);
        size_t n_segs = 0;
        for (size_t start = 0; start + seg <= n; start += hop) {
            double m = 0;
            for (size_t j = 0; j < seg; ++j) m += r[start + j];
            m /= static_cast<double>(seg);
            for (size_t j = 0; j < seg; ++j)
                buf[j] = (r[start + j] - m) * window[j];
            for (size_t k = 1; k <= half; ++k) {
                double re = 0, im = 0;
                for (size_t j = 0; j < seg; ++j) {
                    const double ang = -2.0 * M_PI * static_cast<double>(j) *
                                       static_cast<double>(k) /
                                       static_cast<double>(seg);
                    re += buf[j] * std::cos(ang);
                    im += buf[j] * std::sin(ang);
                }
                double p = (re * re + im * im) / (rate * u);
                if (!(seg % 2 == 0 && k == half)) p *= 2.0;  // fold, not Nyquist
                acc[k - 1] += p;
            }
            ++n_segs;
        }
        for (size_t k = 0; k < half; ++k)
            psd.power[k] += acc[k] / static_cast<double>(n_segs);
    }
    for (double& v : psd.power) v /= static_cast<double>(traces.size());
    return psd;
}

namespace {

double interp_power(const Psd& p, double f) {
    const auto& xs = p.freq;
    if (f <= xs.front()) return p.power.front();
    if (f >= xs.back()) return p.power.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), f);
    const size_t hi = static_cast<size_t>(it - xs.begin());
    const size_t lo = hi - 1;
    const double u = (f - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - u) * p.power[lo] + u * p.power[hi];
}

double integrate_band(const Psd& p, double a, double b) {
    a = std::max(a, p.freq.front());
    b = std::min(b, p.freq.back());
    if (!(b > a)) return 0.0;
    // walk the knots inside (a, b), trapezoid with interpolated edges
    double integral = 0;
    double prev_f = a, prev_v = interp_power(p, a);
    for (size_t i = 0; i < p.freq.size(); ++i) {
        const double f = p.freq[i];
        if (f <= a) continue;
        if (f >= b) break;
        integral += 0.5 * (prev_v + p.power[i]) * (f - prev_f);
        prev_f = f;
        prev_v = p.power[i];
    }
    integral += 0.5 * (prev_v + interp_power(p, b)) * (b - prev_f);
    return integral;
}

}  // namespace

double band_ratio(const Psd& psd, double lo_lo, double lo_hi, double hi_lo,
                  double hi_hi) {
    if (psd.freq.size() < 2)
        throw DataError("band ratio needs a spectrum with at least 2 bins");
    const double lo = integrate_band(psd, lo_lo, lo_hi);
    const double hi = integrate_band(psd, hi_lo, hi_hi);
    if (!(lo > 0)) throw DataError("low band carries no power");
    return hi / lo;
}

}  // namespace gazesim
