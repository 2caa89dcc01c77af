#include "gazesim/data/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace gazesim {

using nlohmann::json;

std::vector<FrameData> load_frames(const std::string& detections_path,
                                   const std::string& masks_path) {
    std::ifstream min(masks_path);
    if (!min) throw DataError("cannot open mask file '" + masks_path + "'");
    std::vector<FrameData> frames;
    std::string line;
    while (std::getline(min, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad mask record in " + masks_path + ": " +
                            e.what());
        }
        if (!j.is_array() || j.size() != kMaskW * kMaskH)
            throw DataError("mask record in " + masks_path +
                            " must be an array of 128 values");
        FrameData f;
        for (size_t i = 0; i < kMaskW * kMaskH; ++i)
            f.mask[i] = j[i].get<double>();
        frames.push_back(std::move(f));
    }

    std::ifstream din(detections_path);
    if (!din)
        throw DataError("cannot open detections file '" + detections_path +
                        "'");
    while (std::getline(din, line)) {
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            const int frame = j.at("frame").get<int>();
            if (frame < 0 || static_cast<size_t>(frame) >= frames.size())
                throw DataError("detection references frame " +
                                std::to_string(frame) + " but " +
                                masks_path + " defines " +
                                std::to_string(frames.size()) + " frames");
            Detection d;
            d.label = j.at("label").get<std::string>();
            const auto& bbox = j.at("bbox");
            if (!bbox.is_array() || bbox.size() != 4)
                throw DataError("detection bbox must be [cx, cy, w, h]");
            d.cx = bbox[0].get<double>();
            d.cy = bbox[1].get<double>();
            d.w = bbox[2].get<double>();
            d.h = bbox[3].get<double>();
            d.score = j.at("score").get<double>();
            d.depth = j.at("depth").get<double>();
            if (j.contains("appearance")) {
                const auto& app = j.at("appearance");
                if (!app.is_array() || app.size() != kAppearanceDim)
                    throw DataError("appearance must have 128 entries");
                d.appearance.resize(kAppearanceDim);
                for (size_t i = 0; i < kAppearanceDim; ++i)
                    d.appearance[i] = app[i].get<double>();
            }
            frames[frame].detections.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw DataError("bad detection record in " + detections_path +
                            ": " + e.what());
        }
    }
    return frames;
}

void save_frames(const std::string& detections_path,
                 const std::string& masks_path,
                 const std::vector<FrameData>& frames) {
    std::ofstream dout(detections_path);
    if (!dout)
        throw DataError("cannot write detections file '" + detections_path +
                        "'");
    std::ofstream mout(masks_path);
    if (!mout) throw DataError("cannot write mask file '" + masks_path + "'");

    for (size_t f = 0; f < frames.size(); ++f) {
        json mask = json::array();
        for (double v : frames[f].mask)
            mask.push_back(v != 0.0 ? 1 : 0);
        mout << mask.dump() << "\n";

        for (const Detection& d : frames[f].detections) {
            json j;
            j["frame"] = static_cast<int>(f);
            j["label"] = d.label;
            j["bbox"] = {d.cx, d.cy, d.w, d.h};
            j["score"] = d.score;
            j["depth"] = d.depth;
            if (!d.appearance.empty()) j["appearance"] = d.appearance;
            dout << j.dump() << "\n";
        }
    }
    if (!dout || !mout)
        throw DataError("failed writing frames under '" + detections_path +
                        "'");
}

AttendedLabels load_attended_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open attended csv '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        (line != "t_sec,track,det_index" &&
         line != "t_sec,track,det_index\r"))
        throw DataError("attended csv " + path +
                        " must start with header t_sec,track,det_index");
    AttendedLabels out;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double t = 0;
        int track = 0, det = 0;
        if (std::sscanf(line.c_str(), "%lf,%d,%d", &t, &track, &det) != 3)
            throw DataError("bad attended record '" + line + "' in " + path);
        out.t_sec.push_back(t);
        out.track.push_back(track);
    }
    return out;
}

std::vector<FrameData> upsample_frames(const std::vector<FrameData>& frames,
                                       int factor) {
    if (factor < 1) throw ConfigError("frame upsampling factor must be >= 1");
    std::vector<FrameData> out;
    out.reserve(frames.size() * factor);
    for (const FrameData& f : frames)
        for (int k = 0; k < factor; ++k) out.push_back(f);
    return out;
}

std::vector<WindowSample> make_windows(const std::vector<FrameData>& frames,
                                       const GazeTrace& gaze, int T,
                                       const std::vector<int>& t_offsets,
                                       int stride) {
    if (T < 1) throw ConfigError("window length must be >= 1");
    if (stride < 1) throw ConfigError("window stride must be >= 1");
    const size_t n = std::min(frames.size(), gaze.size());
    std::vector<WindowSample> out;
    for (size_t k = 0; k + static_cast<size_t>(T) < n; k += stride) {
        std::vector<FrameData> window(frames.begin() + k,
                                      frames.begin() + k + T);
        for (int i = 0; i <= T; ++i) {
            const size_t s = k + i;
            if (!gaze.is_valid(s) || !std::isfinite(gaze.x[s]) ||
                !std::isfinite(gaze.y[s]))
                throw DataError("invalid gaze sample at t=" +
                                std::to_string(gaze.t_at(s)) +
                                "; preprocess the trace first");
            if (i < T) window[i].gaze = {{gaze.x[s], gaze.y[s]}};
        }
        WindowSample sample{assemble_window_graph(window, T, t_offsets),
                            {gaze.x[k + T], gaze.y[k + T]}};
        out.push_back(std::move(sample));
    }
    return out;
}

}  // namespace gazesim
