#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gazesim/data/synth.hpp"
#include "gazesim/util/rng.hpp"

using namespace gazesim;
namespace fs = std::filesystem;

namespace {

SceneScript two_track_script() {
    SceneScript s;
    s.fps = 10;
    s.duration = 4;
    TrackSpec a;
    a.label = "car";
    a.waypoints = {{0.1, 0.2}, {0.9, 0.2}};
    a.depth0 = 0.2;
    a.depth1 = 0.8;
    a.appearance = Rng(1).unit_vector(kAppearanceDim);
    TrackSpec b;
    b.label = "person";
    b.waypoints = {{0.5, 0.8}};
    b.appearance = Rng(2).unit_vector(kAppearanceDim);
    s.tracks = {a, b};
    return s;
}

GazePolicy quiet_policy(GazePolicy::Kind kind) {
    GazePolicy p;
    p.kind = kind;
    p.blink_interval = 0;  // deterministic replay in tests
    return p;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("track interpolation") {
    TrackSpec t;
    t.waypoints = {{0.0, 0.0}, {1.0, 1.0}};
    CHECK(track_position(t, 5.0, 10.0).first == doctest::Approx(0.5));
    CHECK(track_position(t, 0.0, 10.0).first == 0.0);
    CHECK(track_position(t, 10.0, 10.0).first == 1.0);
    CHECK(track_position(t, 15.0, 10.0).first == 1.0);  // clamps
    t.waypoints = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}};
    const auto mid = track_position(t, 5.0, 10.0);
    CHECK(mid.first == doctest::Approx(1.0));
    CHECK(mid.second == doctest::Approx(0.0));
    const auto q = track_position(t, 2.5, 10.0);
    CHECK(q.first == doctest::Approx(0.5));
}

TEST_CASE("generate_scene") {
    SUBCASE("empty script gives empty frames") {
        SceneScript s;
        s.fps = 10;
        s.duration = 2;
        const auto frames = generate_scene(s);
        REQUIRE(frames.size() == 20);
        for (const auto& f : frames) {
            CHECK(f.detections.empty());
            CHECK(f.mask[0] == 0.0);
            CHECK(f.mask[64] == 1.0);  // lower half drivable
        }
    }
    SUBCASE("positions interpolate waypoints exactly") {
        const SceneScript s = two_track_script();
        const auto frames = generate_scene(s);
        REQUIRE(frames.size() == 40);
        for (size_t f = 0; f < frames.size(); ++f) {
            REQUIRE(frames[f].detections.size() == 2);
            const double t = static_cast<double>(f) / s.fps;
            const auto want = track_position(s.tracks[0], t, s.duration);
            CHECK(frames[f].detections[0].cx == want.first);
            CHECK(frames[f].detections[0].cy == want.second);
            CHECK(frames[f].detections[1].cx == 0.5);  // static track
            // depth ramps linearly
            CHECK(frames[f].detections[0].depth ==
                  doctest::Approx(0.2 + 0.6 * t / s.duration));
            CHECK(frames[f].detections[0].appearance ==
                  s.tracks[0].appearance);
        }
    }
    SUBCASE("waypoint outside the unit square is a script error") {
        SceneScript s = two_track_script();
        s.tracks[0].waypoints[1] = {1.2, 0.2};
        CHECK_THROWS_AS(generate_scene(s), DataError);
    }
    SUBCASE("same seed, same scene") {
        SynthConfig cfg;
        cfg.duration = 3;
        const SceneScript a = random_script(77, cfg);
        const SceneScript b = random_script(77, cfg);
        REQUIRE(a.tracks.size() == b.tracks.size());
        for (size_t k = 0; k < a.tracks.size(); ++k) {
            CHECK(a.tracks[k].label == b.tracks[k].label);
            CHECK(a.tracks[k].waypoints == b.tracks[k].waypoints);
            CHECK(a.tracks[k].appearance == b.tracks[k].appearance);
        }
        REQUIRE(a.hazards.size() == b.hazards.size());
        for (size_t k = 0; k < a.hazards.size(); ++k) {
            CHECK(a.hazards[k].track == b.hazards[k].track);
            CHECK(a.hazards[k].onset == b.hazards[k].onset);
        }
        CHECK(!a.hazards.empty());
        for (const auto& h : a.hazards)
            CHECK(h.onset + h.duration <= cfg.duration + 1e-9);
    }
}

TEST_CASE("scripted gaze policies") {
    const SceneScript script = two_track_script();

    SUBCASE("center bias hovers around the middle") {
        SceneScript bare = script;
        bare.hazards.clear();
        const auto sg = scripted_gaze(
            bare, quiet_policy(GazePolicy::Kind::CenterBias), 60, 5);
        REQUIRE(sg.trace.size() == 240);
        double mx = 0, my = 0;
        for (size_t i = 0; i < sg.trace.size(); ++i) {
            CHECK(sg.attended[i] == -1);
            CHECK(sg.trace.x[i] >= 0.0);
            CHECK(sg.trace.x[i] <= 1.0);
            CHECK(std::fabs(sg.trace.x[i] - 0.5) < 0.06);
            mx += sg.trace.x[i];
            my += sg.trace.y[i];
        }
        CHECK(mx / sg.trace.size() == doctest::Approx(0.5).epsilon(0.01));
        CHECK(my / sg.trace.size() == doctest::Approx(0.5).epsilon(0.01));
    }
    SUBCASE("pursuit tracks the object within noise bounds") {
        GazePolicy p = quiet_policy(GazePolicy::Kind::PursuitOf);
        p.track = 0;
        const auto sg = scripted_gaze(script, p, 60, 6);
        for (size_t i = 4; i < sg.trace.size(); ++i) {
            const auto pos = track_position(script.tracks[0],
                                            sg.trace.t_at(i), script.duration);
            CHECK(std::fabs(sg.trace.x[i] - pos.first) < 6 * p.noise_sigma);
            CHECK(std::fabs(sg.trace.y[i] - pos.second) < 6 * p.noise_sigma);
            CHECK(sg.attended[i] == 0);
        }
    }
    SUBCASE("attended label replays the nearest-hazard rule") {
        SceneScript s = script;
        s.hazards = {{0, 0.5, 1.5, 0.9}, {1, 1.0, 2.5, 0.5}};
        const auto sg = scripted_gaze(
            s, quiet_policy(GazePolicy::Kind::AttendNearestHazard), 60, 7);
        for (size_t i = 0; i < sg.trace.size(); ++i) {
            const std::pair<double, double> prev =
                i == 0 ? std::pair<double, double>{0.5, 0.5}
                       : std::pair<double, double>{sg.trace.x[i - 1],
                                                   sg.trace.y[i - 1]};
            CHECK(sg.attended[i] ==
                  attended_track(s, sg.trace.t_at(i), prev));
        }
        // before any hazard: center; once hazard 0 is active it is attended
        CHECK(sg.attended[0] == -1);
        CHECK(sg.attended[static_cast<size_t>(0.6 * 60)] == 0);
    }
    SUBCASE("saccade reaches a static hazard in two steps, then fixates") {
        SceneScript s = script;
        s.hazards = {{1, 1.0, 3.0, 1.0}};  // static person at (0.5, 0.8)
        GazePolicy p = quiet_policy(GazePolicy::Kind::AttendNearestHazard);
        p.noise_sigma = 0.005;
        const auto sg = scripted_gaze(s, p, 60, 8);
        const size_t onset = 60;  // t = 1.0 s
        CHECK(sg.attended[onset - 1] == -1);
        CHECK(sg.attended[onset] == 1);
        // two linear jump steps land on the target
        CHECK(std::fabs(sg.trace.y[onset + 1] - 0.8) < 1e-12);
        for (size_t i = onset + 2; i < static_cast<size_t>(4.0 * 60); ++i) {
            CHECK(std::fabs(sg.trace.x[i] - 0.5) < 6 * p.noise_sigma);
            CHECK(std::fabs(sg.trace.y[i] - 0.8) < 6 * p.noise_sigma);
        }
    }
    SUBCASE("blinks blank out spans with NaN") {
        SceneScript longer = script;
        longer.duration = 12;
        GazePolicy p;  // default blink schedule
        const auto sg = scripted_gaze(longer, p, 60, 9);
        size_t invalid = 0;
        for (size_t i = 0; i < sg.trace.size(); ++i) {
            if (!sg.trace.is_valid(i)) {
                ++invalid;
                CHECK(std::isnan(sg.trace.x[i]));
                CHECK(std::isnan(sg.trace.y[i]));
            } else {
                CHECK(std::isfinite(sg.trace.x[i]));
            }
        }
        CHECK(invalid > 0);
        CHECK(invalid < sg.trace.size() / 4);
    }
}

TEST_CASE("frame files round trip") {
    const SceneScript script = two_track_script();
    const auto frames = generate_scene(script);
    const std::string det = "rt_detections.jsonl";
    const std::string mask = "rt_masks.jsonl";
    save_frames(det, mask, frames);
    const auto loaded = load_frames(det, mask);
    fs::remove(det);
    fs::remove(mask);

    REQUIRE(loaded.size() == frames.size());
    for (size_t f = 0; f < frames.size(); ++f) {
        CHECK(loaded[f].mask == frames[f].mask);
        REQUIRE(loaded[f].detections.size() == frames[f].detections.size());
        for (size_t d = 0; d < frames[f].detections.size(); ++d) {
            const Detection& a = frames[f].detections[d];
            const Detection& b = loaded[f].detections[d];
            CHECK(a.label == b.label);
            CHECK(a.cx == b.cx);
            CHECK(a.cy == b.cy);
            CHECK(a.w == b.w);
            CHECK(a.h == b.h);
            CHECK(a.score == b.score);
            CHECK(a.depth == b.depth);
            CHECK(a.appearance == b.appearance);
        }
    }
}

TEST_CASE("gaze csv round trip") {
    const auto sg = scripted_gaze(two_track_script(), GazePolicy{}, 60, 10);
    const std::string path = "rt_gaze.csv";
    save_gaze_csv(path, sg.trace);
    const GazeTrace loaded = load_gaze_csv(path);

    CHECK(loaded.rate == 60.0);
    CHECK(loaded.t0 == 0.0);
    REQUIRE(loaded.size() == sg.trace.size());
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded.is_valid(i) == sg.trace.is_valid(i));
        if (loaded.is_valid(i)) {
            CHECK(loaded.x[i] == sg.trace.x[i]);
            CHECK(loaded.y[i] == sg.trace.y[i]);
        } else {
            CHECK(std::isnan(loaded.x[i]));
        }
    }
    // a second save of the loaded trace is byte-identical
    const std::string again = "rt_gaze2.csv";
    save_gaze_csv(again, loaded);
    CHECK(read_file(path) == read_file(again));
    fs::remove(path);
    fs::remove(again);

    SUBCASE("rejects malformed input") {
        const std::string bad = "rt_bad.csv";
        std::ofstream(bad) << "t_sec,x,y,valid\n0,0.5,0.5,1\n";
        CHECK_THROWS_AS(load_gaze_csv(bad), DataError);  // single sample
        std::ofstream(bad) << "t_sec,x,y,valid\n0,0.5,0.5,1\n0.05,0.5,0.5,1\n"
                              "0.2,0.5,0.5,1\n";
        CHECK_THROWS_AS(load_gaze_csv(bad), DataError);  // non-uniform
        std::ofstream(bad) << "time,x,y\n";
        CHECK_THROWS_AS(load_gaze_csv(bad), DataError);  // wrong header
        fs::remove(bad);
    }
}

TEST_CASE("upsample and windowing") {
    const auto frames10 = generate_scene(two_track_script());
    const auto frames20 = upsample_frames(frames10, 2);
    REQUIRE(frames20.size() == 80);
    for (size_t f = 0; f < frames10.size(); ++f) {
        CHECK(frames20[2 * f].detections.size() ==
              frames10[f].detections.size());
        CHECK(frames20[2 * f].detections[0].cx ==
              frames10[f].detections[0].cx);
        CHECK(frames20[2 * f + 1].detections[0].cx ==
              frames10[f].detections[0].cx);
    }
    CHECK_THROWS_AS(upsample_frames(frames10, 0), ConfigError);

    GazeTrace gaze;
    gaze.rate = 20;
    for (size_t i = 0; i < 80; ++i) {
        gaze.x.push_back(0.2 + 0.005 * static_cast<double>(i));
        gaze.y.push_back(0.5);
    }
    const auto windows = make_windows(frames20, gaze, 6, {1, 2}, 3);
    // windows start at 0,3,...,72 (targets need sample k+6 <= 79)
    REQUIRE(windows.size() == 25);
    for (size_t k = 0; k < windows.size(); ++k) {
        const auto& w = windows[k];
        CHECK(w.graph.T == 6);
        CHECK(w.graph.nodes.size() == 24);  // 4 nodes per step
        CHECK(w.target.first == gaze.x[3 * k + 6]);
        const auto [lo, hi] = w.graph.step_range(1);
        bool found = false;
        for (int i = lo; i < hi; ++i)
            if (w.graph.nodes[i].type == NodeType::Gaze) {
                CHECK(w.graph.nodes[i].features[kFeatX] == gaze.x[3 * k]);
                found = true;
            }
        CHECK(found);
    }

    SUBCASE("invalid gaze inside a window is rejected") {
        GazeTrace bad = gaze;
        bad.valid.assign(bad.size(), 1);
        bad.valid[4] = 0;
        CHECK_THROWS_AS(make_windows(frames20, bad, 6, {1}, 3), DataError);
    }
}

TEST_CASE("dataset generation is reproducible") {
    SynthConfig cfg;
    cfg.sequences = 2;
    cfg.duration = 2.0;
    cfg.min_objects = 2;
    cfg.max_objects = 3;
    cfg.subjects = 2;
    cfg.seed = 123;

    const std::string d1 = "synth_ds_a";
    const std::string d2 = "synth_ds_b";
    fs::remove_all(d1);
    fs::remove_all(d2);
    const auto dirs1 = generate_dataset(d1, cfg);
    const auto dirs2 = generate_dataset(d2, cfg, 2);
    REQUIRE(dirs1.size() == 2);
    REQUIRE(dirs2.size() == 2);

    const std::vector<std::string> files = {"detections.jsonl", "masks.jsonl",
                                            "gaze.csv", "gaze_s1.csv",
                                            "attended.csv", "meta.json"};
    for (size_t s = 0; s < dirs1.size(); ++s)
        for (const auto& f : files) {
            INFO(dirs1[s] << "/" << f);
            CHECK(read_file(dirs1[s] + "/" + f) ==
                  read_file(dirs2[s] + "/" + f));
        }

    // the emitted artifacts feed straight back into ingestion
    const auto frames = load_frames(dirs1[0] + "/detections.jsonl",
                                    dirs1[0] + "/masks.jsonl");
    CHECK(frames.size() == 20);
    const GazeTrace gaze = load_gaze_csv(dirs1[0] + "/gaze.csv");
    CHECK(gaze.rate == 60.0);
    CHECK(gaze.size() == 120);
    const AttendedLabels att = load_attended_csv(dirs1[0] + "/attended.csv");
    CHECK(att.track.size() == 40);  // graph rate 20 Hz x 2 s
    bool any_attended = false;
    for (int tr : att.track) {
        CHECK(tr >= -1);
        CHECK(tr < 3);
        any_attended = any_attended || tr >= 0;
    }
    CHECK(any_attended);

    fs::remove_all(d1);
    fs::remove_all(d2);
}
