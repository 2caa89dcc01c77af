#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gazesim {

// Flat key=value configuration. Every key exists in the preset defaults, so
// a misspelled key is caught by name instead of silently ignored.
class Config {
public:
    static Config preset(const std::string& name);  // desk | paper

    // key=value (or bare `preset=NAME`, which rebases the defaults)
    void apply(const std::string& assignment);
    void apply_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    const std::string& raw(const std::string& key) const;

    int geti(const std::string& key) const;
    double getd(const std::string& key) const;
    const std::string& gets(const std::string& key) const;
    std::vector<int> get_int_list(const std::string& key) const;
    std::uint64_t getu(const std::string& key) const;

    const std::map<std::string, std::string>& all() const { return kv_; }
    const std::string& preset_name() const { return preset_; }

private:
    std::map<std::string, std::string> kv_;
    std::string preset_;
};

}  // namespace gazesim
