#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazesim/util/errors.hpp"

namespace gazesim {

// Uniformly sampled gaze sequence. Invalid samples (blinks, dropouts) carry
// NaN coordinates and valid = 0.
struct GazeTrace {
    double rate = 20.0;  // samples per second
    double t0 = 0.0;
    std::vector<double> x, y;
    std::vector<std::uint8_t> valid;  // empty means every sample is valid

    size_t size() const { return x.size(); }
    double t_at(size_t i) const { return t0 + static_cast<double>(i) / rate; }
    bool is_valid(size_t i) const { return valid.empty() || valid[i] != 0; }
    double duration() const {
        return static_cast<double>(size()) / rate;
    }
};

// CSV with header t_sec,x,y,valid. Sampling must be uniform; the rate is
// recovered from the timestamps (snapped to an integer when within 1e-6).
GazeTrace load_gaze_csv(const std::string& path);
void save_gaze_csv(const std::string& path, const GazeTrace& trace);

}  // namespace gazesim
