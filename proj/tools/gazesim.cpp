#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gazesim/cli/config.hpp"
#include "gazesim/cli/stages.hpp"
#include "gazesim/util/errors.hpp"

namespace {

using StageFn = void (*)(const gazesim::Config&, const std::string&);

const std::map<std::string, std::pair<const char*, StageFn>> kStages = {
    {"gen", {"generate a synthetic scene + gaze dataset", gazesim::stage_gen}},
    {"train", {"fit the gaze model on the generated dataset",
               gazesim::stage_train}},
    {"simulate", {"roll out stochastic gaze from the trained model",
                  gazesim::stage_simulate}},
    {"fixate", {"detect fixations in generated and reference gaze",
                gazesim::stage_fixate}},
    {"saliency", {"build saliency maps and object salience rankings",
                  gazesim::stage_saliency}},
    {"evaluate", {"score rollouts against reference gaze",
                  gazesim::stage_evaluate}},
    {"report", {"summarize metrics and draw the report figure",
                gazesim::stage_report}},
};

struct StageArgs {
    std::string config_file;
    std::string out = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    int jobs = 1;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gazesim: autoregressive driver-gaze simulation over "
                 "spatio-temporal scene graphs"};
    app.require_subcommand(1);

    for (const auto& [name, entry] : kStages) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        auto args = std::make_shared<StageArgs>();
        sub->add_option("-c,--config", args->config_file,
                        "config file with key=value lines");
        sub->add_option("-o,--out", args->out,
                        "artifact root directory (default: out)");
        CLI::Option* seed_opt =
            sub->add_option("--seed", args->seed, "random seed override");
        CLI::Option* jobs_opt =
            sub->add_option("--jobs", args->jobs, "worker count override");
        sub->add_option(
            "overrides", args->overrides,
            "key=value settings; preset=desk|paper rebases the defaults");
        StageFn fn = entry.second;
        sub->callback([args, seed_opt, jobs_opt, fn]() {
            gazesim::Config cfg = gazesim::Config::preset("desk");
            if (!args->config_file.empty()) cfg.apply_file(args->config_file);
            for (const std::string& kv : args->overrides) cfg.apply(kv);
            if (seed_opt->count())
                cfg.set("seed", std::to_string(args->seed));
            if (jobs_opt->count())
                cfg.set("jobs", std::to_string(args->jobs));
            fn(cfg, args->out);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const gazesim::PrereqError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const gazesim::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
