#include "gazesim/data/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "gazesim/util/rng.hpp"
#include "json.hpp"

namespace gazesim {

namespace fs = std::filesystem;
using nlohmann::json;

std::pair<double, double> track_position(const TrackSpec& track, double t,
                                         double duration) {
    const auto& wp = track.waypoints;
    if (wp.empty()) throw DataError("scene script track has no waypoints");
    if (wp.size() == 1) return wp[0];
    double u = duration > 0 ? t / duration : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const double s = u * static_cast<double>(wp.size() - 1);
    const size_t i =
        std::min(static_cast<size_t>(s), wp.size() - 2);
    const double f = s - static_cast<double>(i);
    return {wp[i].first + f * (wp[i + 1].first - wp[i].first),
            wp[i].second + f * (wp[i + 1].second - wp[i].second)};
}

std::vector<FrameData> generate_scene(const SceneScript& script) {
    if (!(script.fps > 0) || !(script.duration > 0))
        throw DataError("scene script needs positive fps and duration");
    for (const TrackSpec& t : script.tracks) {
        (void)classify_label(t.label);
        if (t.waypoints.empty())
            throw DataError("scene script track has no waypoints");
        for (const auto& [x, y] : t.waypoints)
            if (x < 0 || x > 1 || y < 0 || y > 1)
                throw DataError("scene script waypoint outside [0,1]^2");
        if (!t.appearance.empty() && t.appearance.size() != kAppearanceDim)
            throw DataError("scene script appearance must have 128 entries");
    }
    for (const HazardSpec& h : script.hazards)
        if (h.track < 0 || static_cast<size_t>(h.track) >= script.tracks.size())
            throw DataError("scene script hazard references unknown track");

    const long frames_n = std::lround(script.fps * script.duration);
    std::vector<FrameData> frames(static_cast<size_t>(frames_n));
    for (long f = 0; f < frames_n; ++f) {
        FrameData& frame = frames[f];
        const double t = static_cast<double>(f) / script.fps;
        for (const TrackSpec& track : script.tracks) {
            Detection d;
            d.label = track.label;
            const auto [x, y] = track_position(track, t, script.duration);
            d.cx = x;
            d.cy = y;
            d.w = track.w;
            d.h = track.h;
            d.score = track.score;
            const double u = script.duration > 0 ? t / script.duration : 0.0;
            d.depth = track.depth0 + u * (track.depth1 - track.depth0);
            d.appearance = track.appearance;
            frame.detections.push_back(std::move(d));
        }
        // lower half of the 16x8 grid is drivable
        for (size_t i = kMaskW * kMaskH / 2; i < kMaskW * kMaskH; ++i)
            frame.mask[i] = 1.0;
    }
    return frames;
}

const std::string& policy_name(GazePolicy::Kind kind) {
    static const std::vector<std::string> names = {
        "attend_nearest_hazard", "center_bias", "pursuit_of"};
    return names[static_cast<int>(kind)];
}

int attended_track(const SceneScript& script, double t,
                   std::pair<double, double> gaze) {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (const HazardSpec& h : script.hazards) {
        if (t < h.onset || t >= h.onset + h.duration) continue;
        const auto [px, py] =
            track_position(script.tracks[h.track], t, script.duration);
        const double dx = px - gaze.first;
        const double dy = py - gaze.second;
        const double d = dx * dx + dy * dy;
        if (d < best_d || (d == best_d && h.track < best)) {
            best_d = d;
            best = h.track;
        }
    }
    return best;
}

ScriptedGaze scripted_gaze(const SceneScript& script, const GazePolicy& policy,
                           double rate, std::uint64_t seed) {
    if (!(rate > 0)) throw ConfigError("gaze rate must be positive");
    if (policy.saccade_steps < 1)
        throw ConfigError("saccade_steps must be >= 1");
    if (policy.kind == GazePolicy::Kind::PursuitOf &&
        (policy.track < 0 ||
         static_cast<size_t>(policy.track) >= script.tracks.size()))
        throw ConfigError("pursuit_of policy needs a valid track id");

    const size_t n =
        static_cast<size_t>(std::lround(script.duration * rate));
    Rng rng(seed);

    // blink schedule drawn up front so it cannot disturb the gaze stream
    std::vector<std::pair<size_t, size_t>> blinks;
    if (policy.blink_interval > 0) {
        double t = rng.uniform(0.5 * policy.blink_interval,
                               1.5 * policy.blink_interval);
        while (t < script.duration) {
            const double dur = rng.uniform(policy.blink_min, policy.blink_max);
            const size_t b = static_cast<size_t>(std::llround(t * rate));
            const size_t e = std::min(
                static_cast<size_t>(std::llround((t + dur) * rate)), n);
            if (b < e) blinks.emplace_back(b, e);
            t += dur + rng.uniform(0.5 * policy.blink_interval,
                                   1.5 * policy.blink_interval);
        }
    }

    ScriptedGaze out;
    out.trace.rate = rate;
    out.trace.t0 = 0.0;
    out.trace.x.resize(n);
    out.trace.y.resize(n);
    out.trace.valid.assign(n, 1);
    out.attended.resize(n);

    std::pair<double, double> g = {0.5, 0.5};
    int target = std::numeric_limits<int>::min();
    int jump_left = 0;
    for (size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        int want = -1;
        switch (policy.kind) {
            case GazePolicy::Kind::CenterBias:
                want = -1;
                break;
            case GazePolicy::Kind::PursuitOf:
                want = policy.track;
                break;
            case GazePolicy::Kind::AttendNearestHazard:
                want = attended_track(script, t, g);
                break;
        }
        if (want != target) {
            target = want;
            jump_left = policy.saccade_steps;
        }
        const std::pair<double, double> pos =
            want < 0 ? std::pair<double, double>{0.5, 0.5}
                     : track_position(script.tracks[want], t, script.duration);
        if (jump_left > 0) {
            g.first += (pos.first - g.first) / jump_left;
            g.second += (pos.second - g.second) / jump_left;
            --jump_left;
        } else {
            g = {pos.first + policy.noise_sigma * rng.normal(),
                 pos.second + policy.noise_sigma * rng.normal()};
        }
        g.first = std::clamp(g.first, 0.0, 1.0);
        g.second = std::clamp(g.second, 0.0, 1.0);
        out.trace.x[i] = g.first;
        out.trace.y[i] = g.second;
        out.attended[i] = want;
    }

    for (const auto& [b, e] : blinks)
        for (size_t i = b; i < e; ++i) {
            out.trace.x[i] = std::numeric_limits<double>::quiet_NaN();
            out.trace.y[i] = std::numeric_limits<double>::quiet_NaN();
            out.trace.valid[i] = 0;
        }
    return out;
}

SceneScript random_script(std::uint64_t seed, const SynthConfig& cfg) {
    SceneScript s;
    s.seed = seed;
    s.fps = cfg.fps;
    s.duration = cfg.duration;
    Rng rng(seed);

    const int span = cfg.max_objects - cfg.min_objects;
    if (cfg.min_objects < 0 || span < 0)
        throw ConfigError("bad object count range");
    const int n_obj =
        cfg.min_objects +
        (span > 0 ? static_cast<int>(rng.below(span + 1)) : 0);
    for (int k = 0; k < n_obj; ++k) {
        TrackSpec t;
        t.label = detector_labels()[rng.below(detector_labels().size())];
        const int n_wp = 2 + static_cast<int>(rng.below(3));
        for (int w = 0; w < n_wp; ++w)
            t.waypoints.emplace_back(rng.uniform(0.05, 0.95),
                                     rng.uniform(0.05, 0.95));
        t.w = rng.uniform(0.04, 0.15);
        t.h = rng.uniform(0.04, 0.15);
        t.depth0 = rng.uniform(0.1, 1.0);
        t.depth1 = rng.uniform(0.1, 1.0);
        t.score = rng.uniform(0.6, 0.99);
        t.appearance = rng.unit_vector(kAppearanceDim);
        s.tracks.push_back(std::move(t));
    }
    if (n_obj > 0) {
        // hazards tile most of the timeline so the policy has a target
        double t = rng.uniform(0.3, 0.8);
        while (t + 1.0 < cfg.duration) {
            HazardSpec h;
            h.track = static_cast<int>(rng.below(n_obj));
            h.onset = t;
            h.duration = std::min(rng.uniform(1.5, 3.0), cfg.duration - t);
            h.severity = rng.uniform(0.3, 1.0);
            s.hazards.push_back(h);
            t += h.duration + rng.uniform(0.1, 0.6);
        }
    }
    return s;
}

namespace {

void write_sequence(const std::string& dir, const SceneScript& script,
                    const SynthConfig& cfg, std::uint64_t seq_seed) {
    fs::create_directories(dir);
    const auto frames = generate_scene(script);
    save_frames(dir + "/detections.jsonl", dir + "/masks.jsonl", frames);

    std::vector<int> attended0;
    for (int k = 0; k < cfg.subjects; ++k) {
        const std::uint64_t sub_seed =
            seq_seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(k + 1));
        const ScriptedGaze sg =
            scripted_gaze(script, cfg.policy, cfg.gaze_rate, sub_seed);
        const std::string name =
            k == 0 ? "gaze.csv" : "gaze_s" + std::to_string(k) + ".csv";
        save_gaze_csv(dir + "/" + name, sg.trace);
        if (k == 0) attended0 = sg.attended;
    }

    {
        std::ofstream out(dir + "/attended.csv");
        if (!out) throw DataError("cannot write " + dir + "/attended.csv");
        out << "t_sec,track,det_index\n";
        const long steps = std::lround(cfg.duration * cfg.graph_rate);
        char buf[96];
        for (long j = 0; j < steps; ++j) {
            const double t = static_cast<double>(j) / cfg.graph_rate;
            int track = -1;
            if (!attended0.empty()) {
                const size_t i = std::min(
                    static_cast<size_t>(std::llround(t * cfg.gaze_rate)),
                    attended0.size() - 1);
                track = attended0[i];
            }
            std::snprintf(buf, sizeof(buf), "%.17g,%d,%d\n", t, track, track);
            out << buf;
        }
    }

    json meta;
    meta["seed"] = seq_seed;
    meta["fps"] = script.fps;
    meta["duration"] = script.duration;
    meta["gaze_rate"] = cfg.gaze_rate;
    meta["graph_rate"] = cfg.graph_rate;
    meta["subjects"] = cfg.subjects;
    meta["policy"] = policy_name(cfg.policy.kind);
    json tracks = json::array();
    for (const TrackSpec& t : script.tracks) {
        json jt;
        jt["label"] = t.label;
        json wp = json::array();
        for (const auto& [x, y] : t.waypoints) wp.push_back({x, y});
        jt["waypoints"] = wp;
        jt["bbox"] = {t.w, t.h};
        jt["depth"] = {t.depth0, t.depth1};
        jt["score"] = t.score;
        tracks.push_back(jt);
    }
    meta["tracks"] = tracks;
    json hazards = json::array();
    for (const HazardSpec& h : script.hazards)
        hazards.push_back({{"track", h.track},
                           {"onset", h.onset},
                           {"duration", h.duration},
                           {"severity", h.severity}});
    meta["hazards"] = hazards;
    std::ofstream mout(dir + "/meta.json");
    if (!mout) throw DataError("cannot write " + dir + "/meta.json");
    mout << meta.dump(1) << "\n";
}

}  // namespace

std::vector<std::string> generate_dataset(const std::string& out_dir,
                                          const SynthConfig& cfg, int jobs) {
    if (cfg.sequences < 1) throw ConfigError("sequences must be >= 1");
    if (cfg.subjects < 1) throw ConfigError("subjects must be >= 1");
    if (!(cfg.gaze_rate > 0) || !(cfg.graph_rate > 0) || !(cfg.fps > 0))
        throw ConfigError("rates must be positive");
    fs::create_directories(out_dir);

    Rng master(cfg.seed);
    std::vector<std::uint64_t> seeds(cfg.sequences);
    for (auto& v : seeds) v = master.next_u64();

    std::vector<std::string> dirs(cfg.sequences);
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;

    const auto worker = [&]() {
        while (true) {
            const int s = next.fetch_add(1);
            if (s >= cfg.sequences) return;
            try {
                char name[32];
                std::snprintf(name, sizeof(name), "seq_%04d", s);
                const std::string dir = out_dir + "/" + name;
                write_sequence(dir, random_script(seeds[s], cfg), cfg,
                               seeds[s]);
                dirs[s] = dir;
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return dirs;
}

}  // namespace gazesim
