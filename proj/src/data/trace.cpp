#include "gazesim/data/trace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace gazesim {

namespace {

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

double parse_double(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str())
        throw DataError("bad number '" + s + "' in " + path);
    return v;
}

}  // namespace

GazeTrace load_gaze_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open gaze csv '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty gaze csv " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_sec,x,y,valid")
        throw DataError("gaze csv " + path + " must start with header "
                        "t_sec,x,y,valid");

    std::vector<double> t;
    GazeTrace trace;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != 4)
            throw DataError("gaze csv " + path + " row needs 4 fields");
        t.push_back(parse_double(fields[0], path));
        trace.x.push_back(parse_double(fields[1], path));
        trace.y.push_back(parse_double(fields[2], path));
        trace.valid.push_back(fields[3] == "0" ? 0 : 1);
    }
    if (t.size() < 2)
        throw DataError("gaze csv " + path + " needs at least 2 samples");

    const double dt = t[1] - t[0];
    if (!(dt > 0))
        throw DataError("gaze csv " + path + " timestamps must increase");
    for (size_t i = 1; i + 1 < t.size(); ++i)
        if (std::fabs(t[i + 1] - t[i] - dt) > 1e-6)
            throw DataError("gaze csv " + path + " is not uniformly sampled");

    double rate = 1.0 / dt;
    const double snapped = std::round(rate);
    if (snapped > 0 && std::fabs(rate - snapped) < 1e-6) rate = snapped;
    trace.rate = rate;
    trace.t0 = t[0];
    return trace;
}

void save_gaze_csv(const std::string& path, const GazeTrace& trace) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write gaze csv '" + path + "'");
    out << "t_sec,x,y,valid\n";
    char buf[160];
    for (size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n",
                      trace.t_at(i), trace.x[i], trace.y[i],
                      trace.is_valid(i) ? 1 : 0);
        out << buf;
    }
    if (!out) throw DataError("failed writing gaze csv '" + path + "'");
}

}  // namespace gazesim
