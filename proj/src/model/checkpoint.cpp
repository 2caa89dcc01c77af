#include <fstream>

#include "gazesim/model/model.hpp"
#include "json.hpp"

namespace gazesim {

using nlohmann::json;

void save_checkpoint(const std::string& path, const GazeModel& model) {
    json j;
    j["format"] = "gazesim-checkpoint";
    j["version"] = 1;
    j["seed"] = model.params().seed();
    const ModelConfig& c = model.config();
    j["config"] = {{"d", c.d},
                   {"L", c.L},
                   {"ffn_hidden", c.ffn_hidden},
                   {"heads", c.heads},
                   {"variant", c.variant},
                   {"head", c.head},
                   {"mdn_k", c.mdn_k},
                   {"delta_max", c.delta_max},
                   {"T", c.T},
                   {"t_offsets", c.t_offsets}};
    json params = json::object();
    for (const auto& [name, tensor] : model.params().all()) {
        params[name] = {{"rows", tensor.rows},
                        {"cols", tensor.cols},
                        {"data", tensor.data}};
    }
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out << j.dump(1) << "\n";
    if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

GazeModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint '" + path + "': " + e.what());
    }
    if (j.value("format", "") != "gazesim-checkpoint")
        throw DataError("'" + path + "' is not a checkpoint file");

    ModelConfig cfg;
    const json& c = j.at("config");
    cfg.d = c.at("d").get<int>();
    cfg.L = c.at("L").get<int>();
    cfg.ffn_hidden = c.at("ffn_hidden").get<int>();
    cfg.heads = c.at("heads").get<int>();
    cfg.variant = c.at("variant").get<std::string>();
    cfg.head = c.at("head").get<std::string>();
    cfg.mdn_k = c.at("mdn_k").get<int>();
    cfg.delta_max = c.at("delta_max").get<double>();
    cfg.T = c.at("T").get<int>();
    cfg.t_offsets = c.at("t_offsets").get<std::vector<int>>();

    GazeModel model(cfg, j.value("seed", std::uint64_t{0}));
    for (const auto& [name, pj] : j.at("params").items()) {
        const size_t rows = pj.at("rows").get<size_t>();
        const size_t cols = pj.at("cols").get<size_t>();
        Tensor tensor(rows, cols);
        tensor.data = pj.at("data").get<std::vector<double>>();
        if (tensor.data.size() != rows * cols)
            throw DataError("checkpoint tensor '" + name + "' size mismatch");
        model.params().all()[name] = std::move(tensor);
    }
    model.params().frozen = true;
    return model;
}

}  // namespace gazesim
