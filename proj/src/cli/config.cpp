#include "gazesim/cli/config.hpp"

#include <cstdlib>
#include <fstream>

#include "gazesim/util/errors.hpp"

namespace gazesim {

namespace {

std::map<std::string, std::string> desk_defaults() {
    return {
        {"seed", "0"},
        {"jobs", "1"},
        {"gen.sequences", "12"},
        {"gen.duration", "6"},
        {"gen.fps", "10"},
        {"gen.graph_rate", "20"},
        {"gen.gaze_rate", "60"},
        {"gen.min_objects", "3"},
        {"gen.max_objects", "6"},
        {"gen.subjects", "2"},
        {"gen.policy", "attend_nearest_hazard"},
        {"model.d", "32"},
        {"model.L", "2"},
        {"model.ffn_hidden", "64"},
        {"model.variant", "art"},
        {"model.head", "odn"},
        {"model.mdn_k", "10"},
        {"model.delta_max", "0.05"},
        {"model.T", "6"},
        {"model.t_offsets", "1,2"},
        {"train.base_lr", "3e-4"},
        {"train.odn_lr_scale", "0.1"},
        {"train.weight_decay", "1e-6"},
        {"train.batch_size", "16"},
        {"train.epochs", "4"},
        {"train.stride", "2"},
        {"train.val_fraction", "0.25"},
        {"sim.horizon", "80"},
        {"sim.runs", "8"},
        {"sim.salience_runs", "8"},
        {"post.fix_t1", "0.08"},
        {"post.fix_t2", "0.05"},
        {"post.fix_min_dur", "0.1"},
        {"post.sal_width", "160"},
        {"post.sal_height", "80"},
        {"eval.frame_w", "640"},
        {"eval.frame_h", "320"},
        {"eval.aoi_radius", "0.1"},
    };
}

std::map<std::string, std::string> paper_defaults() {
    auto kv = desk_defaults();
    kv["gen.sequences"] = "200";
    kv["gen.duration"] = "10";
    kv["gen.max_objects"] = "8";
    kv["model.d"] = "128";
    kv["model.ffn_hidden"] = "256";
    kv["model.T"] = "20";
    kv["model.t_offsets"] = "1,2,4,8,16";
    kv["train.batch_size"] = "128";
    kv["train.epochs"] = "50";
    kv["train.stride"] = "1";
    kv["train.val_fraction"] = "0.2";
    kv["sim.horizon"] = "100";
    kv["sim.runs"] = "50";
    kv["sim.salience_runs"] = "60";
    return kv;
}

}  // namespace

Config Config::preset(const std::string& name) {
    Config c;
    c.preset_ = name;
    if (name == "desk")
        c.kv_ = desk_defaults();
    else if (name == "paper")
        c.kv_ = paper_defaults();
    else
        throw ConfigError("unknown preset '" + name + "' (desk or paper)");
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
}

namespace {

std::string trimmed(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

}  // namespace

void Config::apply(const std::string& assignment) {
    const size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("expected key=value, got '" + assignment + "'");
    const std::string key = trimmed(assignment.substr(0, eq));
    const std::string value = trimmed(assignment.substr(eq + 1));
    if (key.empty())
        throw ConfigError("expected key=value, got '" + assignment + "'");
    if (key == "preset") {
        Config base = preset(value);
        // keep the fresh defaults but preserve nothing: a preset rebases
        kv_ = base.kv_;
        preset_ = base.preset_;
        return;
    }
    set(key, value);
}

void Config::apply_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        size_t a = line.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t");
        try {
            apply(line.substr(a, b - a + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(std::string(e.what()) + " (" + path + ":" +
                              std::to_string(lineno) + ")");
        }
    }
}

const std::string& Config::raw(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

int Config::geti(const std::string& key) const {
    const std::string& s = raw(key);
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "' needs an integer, got '" +
                          s + "'");
    return static_cast<int>(v);
}

std::uint64_t Config::getu(const std::string& key) const {
    const std::string& s = raw(key);
    char* end = nullptr;
    // strtoull would happily wrap a negative value around
    const unsigned long long v =
        s.empty() || s[0] == '-' ? 0 : std::strtoull(s.c_str(), &end, 10);
    if (end == nullptr || end == s.c_str() || *end != '\0')
        throw ConfigError("config key '" + key +
                          "' needs a non-negative integer, got '" + s + "'");
    return v;
}

double Config::getd(const std::string& key) const {
    const std::string& s = raw(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError("config key '" + key + "' needs a number, got '" +
                          s + "'");
    return v;
}

const std::string& Config::gets(const std::string& key) const {
    return raw(key);
}

std::vector<int> Config::get_int_list(const std::string& key) const {
    const std::string& s = raw(key);
    std::vector<int> out;
    size_t start = 0;
    while (start <= s.size()) {
        const size_t comma = s.find(',', start);
        const std::string tok =
            s.substr(start, comma == std::string::npos ? comma : comma - start);
        char* end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0')
            throw ConfigError("config key '" + key +
                              "' needs a comma-separated integer list, got '" +
                              s + "'");
        out.push_back(static_cast<int>(v));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace gazesim
