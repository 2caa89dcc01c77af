#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gazesim/post/gaze_post.hpp"

using namespace gazesim;

namespace {

GazeTrace uniform_trace(double rate, size_t n) {
    GazeTrace t;
    t.rate = rate;
    t.t0 = 0.0;
    t.x.assign(n, 0.0);
    t.y.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        t.x[i] = 0.1 + 0.8 * static_cast<double>(i) / static_cast<double>(n - 1);
        t.y[i] = 0.3 + 0.2 * std::sin(0.2 * static_cast<double>(i));
    }
    return t;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Dense reference blur: 2D Gaussian product kernel with per-axis reflection.
int reflect(int i, int n) {
    if (n == 1) return 0;
    const int m = 2 * n;
    i = ((i % m) + m) % m;
    return i < n ? i : m - 1 - i;
}

Tensor brute_blur(const Tensor& in, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0;
    for (int j = -radius; j <= radius; ++j) {
        k[static_cast<size_t>(j + radius)] =
            std::exp(-(j * j) / (2.0 * sigma * sigma));
        sum += k[static_cast<size_t>(j + radius)];
    }
    for (double& v : k) v /= sum;
    const int h = static_cast<int>(in.rows), w = static_cast<int>(in.cols);
    Tensor out(in.rows, in.cols);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0;
            for (int dr = -radius; dr <= radius; ++dr)
                for (int dc = -radius; dc <= radius; ++dc)
                    acc += k[static_cast<size_t>(dr + radius)] *
                           k[static_cast<size_t>(dc + radius)] *
                           in.data[static_cast<size_t>(reflect(r + dr, h)) * w +
                                   static_cast<size_t>(reflect(c + dc, w))];
            out.data[static_cast<size_t>(r) * w + static_cast<size_t>(c)] = acc;
        }
    return out;
}

}  // namespace

TEST_CASE("preprocess fills blink gaps by linear interpolation") {
    auto raw = uniform_trace(60.0, 121);
    raw.valid.assign(121, 1);
    for (size_t i = 40; i <= 49; ++i) {
        raw.x[i] = std::nan("");
        raw.y[i] = std::nan("");
        raw.valid[i] = 0;
    }
    auto out = preprocess_gaze(raw, 60.0);
    REQUIRE(out.size() == 121);
    CHECK(out.rate == 60.0);
    for (size_t i = 40; i <= 49; ++i) {
        const double u = static_cast<double>(i - 39) / 11.0;
        CHECK(out.x[i] == doctest::Approx((1 - u) * raw.x[39] + u * raw.x[50])
                              .epsilon(1e-15));
        CHECK(std::isfinite(out.y[i]));
    }
    CHECK(out.x[39] == raw.x[39]);
    CHECK(out.x[50] == raw.x[50]);
}

TEST_CASE("preprocess fills trace ends with the nearest valid sample") {
    auto raw = uniform_trace(60.0, 20);
    raw.valid.assign(20, 1);
    raw.valid[0] = raw.valid[1] = 0;
    raw.valid[18] = raw.valid[19] = 0;
    auto out = preprocess_gaze(raw, 60.0);
    CHECK(out.x[0] == raw.x[2]);
    CHECK(out.x[1] == raw.x[2]);
    CHECK(out.x[18] == raw.x[17]);
    CHECK(out.x[19] == raw.x[17]);
    CHECK(out.x[5] == raw.x[5]);
}

TEST_CASE("preprocess resamples 60 Hz to 20 Hz by exact decimation") {
    auto raw = uniform_trace(60.0, 121);
    auto out = preprocess_gaze(raw, 20.0);
    REQUIRE(out.size() == 41);
    CHECK(out.rate == 20.0);
    for (size_t k = 0; k < 41; ++k) {
        CHECK(out.x[k] == raw.x[3 * k]);
        CHECK(out.y[k] == raw.y[3 * k]);
    }
    CHECK(out.x.front() == raw.x.front());
    CHECK(out.x.back() == raw.x.back());
}

TEST_CASE("preprocess upsamples by linear interpolation") {
    auto raw = uniform_trace(20.0, 5);
    auto out = preprocess_gaze(raw, 60.0);
    REQUIRE(out.size() == 13);
    CHECK(out.x[0] == raw.x[0]);
    CHECK(out.x[12] == raw.x[4]);
    CHECK(out.x[1] ==
          doctest::Approx(raw.x[0] * 2.0 / 3.0 + raw.x[1] / 3.0).epsilon(1e-15));
    CHECK(out.x[3] == doctest::Approx(raw.x[1]).epsilon(1e-15));
}

TEST_CASE("preprocess needs two valid samples and a positive rate") {
    auto raw = uniform_trace(60.0, 10);
    raw.valid.assign(10, 0);
    raw.valid[3] = 1;
    CHECK_THROWS_AS(preprocess_gaze(raw, 20.0), DataError);
    raw.valid[7] = 1;
    CHECK_NOTHROW(preprocess_gaze(raw, 20.0));
    CHECK_THROWS_AS(preprocess_gaze(raw, 0.0), ConfigError);
    GazeTrace tiny;
    tiny.rate = 60.0;
    tiny.x = {0.5};
    tiny.y = {0.5};
    CHECK_THROWS_AS(preprocess_gaze(tiny, 20.0), DataError);
}

TEST_CASE("fixation detection finds planted clusters and skips transits") {
    GazeTrace g;
    g.rate = 20.0;
    g.t0 = 0.0;
    auto add = [&](double x, double y, int reps) {
        for (int i = 0; i < reps; ++i) {
            g.x.push_back(x);
            g.y.push_back(y);
        }
    };
    add(0.300, 0.400, 4);
    add(0.304, 0.404, 4);  // cluster A: 8 samples, centroid (0.302, 0.402)
    add(0.60, 0.10, 1);    // transit singletons, each below min duration
    add(0.90, 0.70, 1);
    add(0.700, 0.600, 6);
    add(0.703, 0.597, 6);  // cluster B: 12 samples
    auto fx = detect_fixations(g);
    REQUIRE(fx.size() == 2);
    CHECK(fx[0].x == doctest::Approx(0.302).epsilon(1e-12));
    CHECK(fx[0].y == doctest::Approx(0.402).epsilon(1e-12));
    CHECK(fx[0].duration == doctest::Approx(8 * 0.05).epsilon(1e-12));
    CHECK(fx[0].onset == 0.0);
    CHECK(fx[1].x == doctest::Approx(0.7015).epsilon(1e-12));
    CHECK(fx[1].duration == doctest::Approx(12 * 0.05).epsilon(1e-12));
    CHECK(fx[1].onset == doctest::Approx(10 * 0.05).epsilon(1e-12));
}

TEST_CASE("fixation stage 2 drops outliers from the stage-1 cluster") {
    GazeTrace g;
    g.rate = 20.0;
    g.t0 = 0.0;
    // 3 tight samples, one 0.07-away excursion kept by stage 1, 2 more tight.
    g.x = {0.500, 0.501, 0.499, 0.570, 0.500, 0.501};
    g.y = {0.500, 0.500, 0.500, 0.500, 0.500, 0.500};
    auto fx = detect_fixations(g);
    REQUIRE(fx.size() == 1);
    CHECK(fx[0].duration == doctest::Approx(5 * 0.05).epsilon(1e-12));
    CHECK(std::abs(fx[0].x - 0.5) < 0.005);
    CHECK(fx[0].onset == 0.0);
}

TEST_CASE("fixations shorter than the duration threshold are rejected") {
    GazeTrace g;
    g.rate = 20.0;
    g.t0 = 0.0;
    // one valid fixation, then a single distant stop (1 sample = 0.05 s)
    for (int i = 0; i < 4; ++i) {
        g.x.push_back(0.2);
        g.y.push_back(0.2);
    }
    g.x.push_back(0.8);
    g.y.push_back(0.8);
    auto fx = detect_fixations(g);
    REQUIRE(fx.size() == 1);
    CHECK(fx[0].x == doctest::Approx(0.2));
    // exactly min_dur passes: 2 samples at 20 Hz = 0.1 s
    GazeTrace h;
    h.rate = 20.0;
    h.x = {0.4, 0.4, 0.9, 0.1, 0.9, 0.1};
    h.y = {0.4, 0.4, 0.9, 0.1, 0.9, 0.1};
    auto fx2 = detect_fixations(h);
    REQUIRE(fx2.size() == 1);
    CHECK(fx2[0].duration == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("fixation detection rejects invalid samples") {
    GazeTrace g;
    g.rate = 20.0;
    g.x = {0.5, 0.5, 0.5};
    g.y = {0.5, 0.5, 0.5};
    g.valid = {1, 0, 1};
    CHECK_THROWS_AS(detect_fixations(g), DataError);
    g.valid.clear();
    g.x[1] = std::nan("");
    CHECK_THROWS_AS(detect_fixations(g), DataError);
    GazeTrace empty;
    empty.rate = 20.0;
    CHECK(detect_fixations(empty).empty());
    FixationParams bad;
    bad.t1 = 0.0;
    GazeTrace ok;
    ok.rate = 20.0;
    ok.x = {0.5, 0.5};
    ok.y = {0.5, 0.5};
    CHECK_THROWS_AS(detect_fixations(ok, bad), ConfigError);
}

TEST_CASE("saliency map peaks at the fixation pixel and is symmetric") {
    std::vector<Fixation> fx = {{0.0, 0.5, 0.5, 0.5}};
    SaliencyParams p;
    p.width = 160;
    p.height = 80;
    auto m = build_saliency_map(fx, p);
    REQUIRE(m.rows == 80);
    REQUIRE(m.cols == 160);
    size_t arg = 0;
    for (size_t i = 1; i < m.data.size(); ++i)
        if (m.data[i] > m.data[arg]) arg = i;
    CHECK(arg / 160 == 40);  // lround(0.5 * 79)
    CHECK(arg % 160 == 80);  // lround(0.5 * 159)
    CHECK(m.data[arg] == 1.0);
    for (int d = 1; d <= 10; ++d)
        CHECK(m.data[40 * 160 + 80 - d] ==
              doctest::Approx(m.data[40 * 160 + 80 + d]).epsilon(1e-12));
    for (int d = 1; d <= 10; ++d)
        CHECK(m.data[40 * 160 + 80 + d] < m.data[40 * 160 + 80 + d - 1]);
}

TEST_CASE("separable blur matches a dense 2D convolution") {
    SaliencyParams p;
    p.width = 9;
    p.height = 7;
    p.sigma_base = 1.2 * 640.0 / 9.0;  // sigma 1.2 on this grid
    std::vector<Fixation> fx = {{0, 0.1, 0.22, 0.3},
                                {0, 0.1, 0.8, 0.65},
                                {0, 0.1, 0.8, 0.65},
                                {0, 0.1, 0.45, 0.9}};
    auto fast = build_saliency_map(fx, p);

    Tensor counts(7, 9);
    counts.data[static_cast<size_t>(std::lround(0.3 * 6)) * 9 +
                static_cast<size_t>(std::lround(0.22 * 8))] += 1;
    counts.data[static_cast<size_t>(std::lround(0.65 * 6)) * 9 +
                static_cast<size_t>(std::lround(0.8 * 8))] += 2;
    counts.data[static_cast<size_t>(std::lround(0.9 * 6)) * 9 +
                static_cast<size_t>(std::lround(0.45 * 8))] += 1;
    auto slow = brute_blur(counts, 1.2);
    const double peak = *std::max_element(slow.data.begin(), slow.data.end());
    for (double& v : slow.data) v /= peak;

    REQUIRE(fast.data.size() == slow.data.size());
    for (size_t i = 0; i < fast.data.size(); ++i)
        CHECK(fast.data[i] == doctest::Approx(slow.data[i]).epsilon(1e-12));
}

TEST_CASE("an empty fixation set maps to an all-zero grid") {
    auto m = build_saliency_map({}, {});
    for (double v : m.data) CHECK(v == 0.0);
}

TEST_CASE("object salience pools mixture mass across runs") {
    auto mk = [](double pi, int det, NodeType ty) {
        GmmComponent c;
        c.pi = pi;
        c.det_index = det;
        c.type = ty;
        return c;
    };
    Rollout r1, r2;
    r1.mixtures.resize(2);
    r2.mixtures.resize(2);
    r1.mixtures[0].comps = {mk(0.5, 0, NodeType::Vehicle),
                            mk(0.3, 1, NodeType::Person),
                            mk(0.15, -1, NodeType::Gaze),
                            mk(0.05, -1, NodeType::Structure)};
    r2.mixtures[0].comps = {mk(0.1, 0, NodeType::Vehicle),
                            mk(0.6, 1, NodeType::Person),
                            mk(0.3, -1, NodeType::Gaze)};
    r1.mixtures[1].comps = {mk(1.0, -1, NodeType::Gaze)};
    r2.mixtures[1].comps = {mk(0.4, -1, NodeType::Gaze),
                            mk(0.6, -1, NodeType::Structure)};

    auto sal = rank_object_salience({r1, r2});
    REQUIRE(sal.size() == 2);
    REQUIRE(sal[0].det_index == std::vector<int>{0, 1});
    // pooled mass: det0 = 0.6, det1 = 0.9; after softmax + rescale the
    // scores are exp(v - vmax)
    CHECK(sal[0].score[1] == 1.0);
    CHECK(sal[0].score[0] == doctest::Approx(std::exp(0.6 - 0.9)).epsilon(1e-12));
    CHECK(sal[1].det_index.empty());  // gaze/structure only

    CHECK_THROWS_AS(rank_object_salience({}), DataError);
    Rollout none;
    CHECK_THROWS_AS(rank_object_salience({none}), DataError);
    Rollout shorter;
    shorter.mixtures.resize(1);
    CHECK_THROWS_AS(rank_object_salience({r1, shorter}), DataError);
}

TEST_CASE("fixation csv round trips exactly") {
    std::vector<Fixation> fx = {{0.05, 0.4, 1.0 / 3.0, 0.123456789012345},
                                {1.25, 0.1, 0.9, 1e-17}};
    save_fixations_csv("fixations_roundtrip.csv", fx);
    auto back = load_fixations_csv("fixations_roundtrip.csv");
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].onset == fx[i].onset);
        CHECK(back[i].duration == fx[i].duration);
        CHECK(back[i].x == fx[i].x);
        CHECK(back[i].y == fx[i].y);
    }
    std::ofstream bad("fixations_bad.csv");
    bad << "onset,duration\n";
    bad.close();
    CHECK_THROWS_AS(load_fixations_csv("fixations_bad.csv"), DataError);
    std::remove("fixations_roundtrip.csv");
    std::remove("fixations_bad.csv");
}

TEST_CASE("grid csv and pgm writers are exact and deterministic") {
    Tensor g(2, 3);
    g.data = {0.0, 0.25, 1.0 / 3.0, 0.5, 0.75, 1.0};
    save_grid_csv("grid_roundtrip.csv", g);
    auto back = load_grid_csv("grid_roundtrip.csv");
    REQUIRE(back.rows == 2);
    REQUIRE(back.cols == 3);
    CHECK(back.data == g.data);

    save_pgm("grid_a.pgm", g);
    save_pgm("grid_b.pgm", g);
    const std::string a = read_file("grid_a.pgm");
    CHECK(a == read_file("grid_b.pgm"));
    CHECK(a.substr(0, 3) == "P2\n");
    CHECK(a.find("3 2\n255\n") != std::string::npos);
    CHECK(a.find("255\n0 64 85\n128 191 255\n") != std::string::npos);

    std::remove("grid_roundtrip.csv");
    std::remove("grid_a.pgm");
    std::remove("grid_b.pgm");
}
