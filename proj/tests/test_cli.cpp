#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

// End-to-end tests drive the installed binary the way a user would.

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(GAZESIM_BIN) + " " + args +
                            " > cli_stdout.txt 2> cli_stderr.txt";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTinyConfig =
    "gen.sequences=2\n"
    "gen.duration=3\n"
    "gen.max_objects=4\n"
    "model.d=8\n"
    "model.L=1\n"
    "model.ffn_hidden=16\n"
    "model.T=4\n"
    "model.t_offsets=1,2\n"
    "train.epochs=1\n"
    "train.batch_size=8\n"
    "train.stride=4\n"
    "sim.horizon=10\n"
    "sim.runs=2\n"
    "sim.salience_runs=2\n"
    "post.sal_width=64\n"
    "post.sal_height=32\n";

std::string tiny_config_path() {
    const fs::path p = "cli_tiny.cfg";
    std::ofstream out(p);
    out << kTinyConfig;
    return p.string();
}

const std::vector<std::string> kStages = {"gen",     "train",    "simulate",
                                          "fixate",  "saliency", "evaluate",
                                          "report"};

void run_chain(const std::string& cfg, const std::string& out) {
    fs::remove_all(out);
    for (const std::string& st : kStages) {
        INFO("stage ", st);
        CHECK(run_cli(st + " -c " + cfg + " -o " + out) == 0);
    }
}

}  // namespace

TEST_CASE("the full pipeline runs, lands its artifacts and reproduces") {
    const std::string cfg = tiny_config_path();
    run_chain(cfg, "cli_a");
    run_chain(cfg, "cli_b");

    const std::vector<std::string> expect = {
        "data/seq_0001/gaze_s1.csv",
        "model/checkpoint.json",
        "model/train_report.json",
        "sim/seq_0000/run_01.csv",
        "sim/seq_0000/mixtures.jsonl",
        "fix/seq_0001/run_00_fixations.csv",
        "fix/seq_0001/gt_s1_fixations.csv",
        "saliency/seq_0000/gen_saliency.pgm",
        "saliency/baseline.csv",
        "eval/metrics.csv",
        "eval/dynamics.csv",
        "eval/psd.csv",
        "report/summary.csv",
        "report/report.svg",
    };
    for (const std::string& f : expect) {
        INFO("artifact ", f);
        CHECK(fs::exists(fs::path("cli_a") / f));
    }

    // every stage manifest lists exactly files that exist
    for (const std::string& sub :
         {"data", "model", "sim", "fix", "saliency", "eval", "report"}) {
        const fs::path mpath = fs::path("cli_a") / sub / "manifest.json";
        REQUIRE(fs::exists(mpath));
        json m;
        std::ifstream(mpath) >> m;
        CHECK(m.at("seed").get<std::uint64_t>() == 0);
        CHECK(m.at("config").is_object());
        for (const json& f : m.at("files")) {
            INFO("listed file ", f.get<std::string>());
            CHECK(fs::exists(fs::path("cli_a") / sub / f.get<std::string>()));
        }
    }

    // independent runs of the identical chain agree byte for byte
    for (const std::string& f :
         {"model/checkpoint.json", "eval/metrics.csv", "eval/psd.csv",
          "report/summary.csv", "report/report.svg"}) {
        INFO("compare ", f);
        CHECK(slurp(fs::path("cli_a") / f) == slurp(fs::path("cli_b") / f));
    }

    fs::remove_all("cli_a");
    fs::remove_all("cli_b");
}

TEST_CASE("stage order is enforced with a pointer at the missing stage") {
    const std::string cfg = tiny_config_path();
    fs::remove_all("cli_order");
    CHECK(run_cli("train -c " + cfg + " -o cli_order") == 3);
    CHECK(run_cli("evaluate -c " + cfg + " -o cli_order") == 3);
    CHECK(run_cli("report -c " + cfg + " -o cli_order") == 3);
    CHECK(slurp("cli_stderr.txt").find("gazesim gen") != std::string::npos);

    CHECK(run_cli("gen -c " + cfg + " -o cli_order") == 0);
    // data alone is not enough to simulate
    CHECK(run_cli("simulate -c " + cfg + " -o cli_order") == 3);
    CHECK(slurp("cli_stderr.txt").find("gazesim train") != std::string::npos);
    fs::remove_all("cli_order");
}

TEST_CASE("finished stages are write-once") {
    const std::string cfg = tiny_config_path();
    fs::remove_all("cli_once");
    CHECK(run_cli("gen -c " + cfg + " -o cli_once") == 0);
    CHECK(run_cli("gen -c " + cfg + " -o cli_once") == 1);
    CHECK(slurp("cli_stderr.txt").find("write-once") != std::string::npos);
    fs::remove_all("cli_once");
}

TEST_CASE("configuration mistakes exit with status 1") {
    CHECK(run_cli("gen no.such.key=1 -o cli_cfgerr") == 1);
    CHECK(slurp("cli_stderr.txt").find("no.such.key") != std::string::npos);
    CHECK(run_cli("gen gen.sequences=two -o cli_cfgerr") == 1);
    CHECK(run_cli("gen preset=bench -o cli_cfgerr") == 1);
    CHECK(run_cli("gen gen.policy=stare_blankly -o cli_cfgerr") == 1);
    CHECK(run_cli("frobnicate") != 0);  // unknown subcommand, CLI error
    CHECK(!fs::exists("cli_cfgerr/data/manifest.json"));
    fs::remove_all("cli_cfgerr");
}

TEST_CASE("the seed flag steers generation and is echoed in the manifest") {
    const std::string cfg = tiny_config_path();
    fs::remove_all("cli_s0");
    fs::remove_all("cli_s7");
    CHECK(run_cli("gen -c " + cfg + " -o cli_s0 --seed 0") == 0);
    CHECK(run_cli("gen -c " + cfg + " -o cli_s7 --seed 7") == 0);
    CHECK(slurp("cli_s0/data/seq_0000/gaze.csv") !=
          slurp("cli_s7/data/seq_0000/gaze.csv"));
    json m;
    std::ifstream("cli_s7/data/manifest.json") >> m;
    CHECK(m.at("seed").get<std::uint64_t>() == 7);
    CHECK(m.at("config").at("seed").get<std::string>() == "7");
    fs::remove_all("cli_s0");
    fs::remove_all("cli_s7");
}
