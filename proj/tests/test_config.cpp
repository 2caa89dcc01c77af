#include <cstdio>
#include <fstream>
#include <string>

#include "doctest.h"
#include "gazesim/cli/config.hpp"
#include "gazesim/util/errors.hpp"

using namespace gazesim;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    std::string path = "cfg_" + name;
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("desk preset carries the full key set") {
    Config c = Config::preset("desk");
    CHECK(c.preset_name() == "desk");
    CHECK(c.geti("gen.sequences") == 12);
    CHECK(c.getd("gen.duration") == 6.0);
    CHECK(c.geti("model.d") == 32);
    CHECK(c.gets("model.variant") == "art");
    CHECK(c.gets("gen.policy") == "attend_nearest_hazard");
    CHECK(c.getd("train.base_lr") == doctest::Approx(3e-4));
    CHECK(c.geti("sim.horizon") == 80);
    CHECK(c.getd("post.fix_t1") == 0.08);
    CHECK(c.geti("eval.frame_w") == 640);
    CHECK(c.getu("seed") == 0);
    CHECK(c.get_int_list("model.t_offsets") == std::vector<int>{1, 2});
    // every value in the map is reachable through raw()
    for (const auto& [k, v] : c.all()) CHECK(c.raw(k) == v);
}

TEST_CASE("paper preset overrides scale knobs and keeps the rest") {
    Config p = Config::preset("paper");
    CHECK(p.geti("gen.sequences") == 200);
    CHECK(p.geti("model.d") == 128);
    CHECK(p.geti("model.T") == 20);
    CHECK(p.get_int_list("model.t_offsets") ==
          std::vector<int>{1, 2, 4, 8, 16});
    CHECK(p.geti("train.epochs") == 50);
    CHECK(p.geti("sim.runs") == 50);
    CHECK(p.geti("sim.salience_runs") == 60);
    // untouched keys match desk
    Config d = Config::preset("desk");
    CHECK(p.gets("gen.policy") == d.gets("gen.policy"));
    CHECK(p.getd("post.fix_t2") == d.getd("post.fix_t2"));
    CHECK(p.geti("gen.fps") == d.geti("gen.fps"));
}

TEST_CASE("unknown preset and unknown key are named in the error") {
    CHECK_THROWS_WITH_AS(Config::preset("bench"),
                         doctest::Contains("unknown preset 'bench'"),
                         ConfigError);
    Config c = Config::preset("desk");
    CHECK_THROWS_WITH_AS(c.set("gen.sequence", "9"),
                         doctest::Contains("'gen.sequence'"), ConfigError);
    CHECK_THROWS_WITH_AS(c.raw("nope"), doctest::Contains("'nope'"),
                         ConfigError);
}

TEST_CASE("apply parses key=value and rejects malformed input") {
    Config c = Config::preset("desk");
    c.apply("gen.sequences=3");
    CHECK(c.geti("gen.sequences") == 3);
    c.apply("model.t_offsets=1,3,9");
    CHECK(c.get_int_list("model.t_offsets") == std::vector<int>{1, 3, 9});
    c.apply("gen.policy=center_bias");
    CHECK(c.gets("gen.policy") == "center_bias");
    CHECK_THROWS_AS(c.apply("gen.sequences"), ConfigError);
    CHECK_THROWS_AS(c.apply("=3"), ConfigError);
    CHECK_THROWS_AS(c.apply("no.such.key=1"), ConfigError);
}

TEST_CASE("preset assignment rebases, discarding earlier overrides") {
    Config c = Config::preset("desk");
    c.apply("gen.sequences=99");
    c.apply("preset=paper");
    CHECK(c.preset_name() == "paper");
    CHECK(c.geti("gen.sequences") == 200);  // the override is gone
    c.apply("preset=desk");
    CHECK(c.geti("gen.sequences") == 12);
}

TEST_CASE("typed getters insist on a full-token parse") {
    Config c = Config::preset("desk");
    c.apply("gen.sequences=12x");
    CHECK_THROWS_WITH_AS(c.geti("gen.sequences"),
                         doctest::Contains("integer"), ConfigError);
    c.apply("gen.duration=1.5s");
    CHECK_THROWS_WITH_AS(c.getd("gen.duration"), doctest::Contains("number"),
                         ConfigError);
    c.apply("seed=-1");
    CHECK_THROWS_AS(c.getu("seed"), ConfigError);
    c.apply("model.t_offsets=1,,2");
    CHECK_THROWS_AS(c.get_int_list("model.t_offsets"), ConfigError);
    c.apply("model.t_offsets=1,2,");
    CHECK_THROWS_AS(c.get_int_list("model.t_offsets"), ConfigError);
    c.apply("model.t_offsets=7");
    CHECK(c.get_int_list("model.t_offsets") == std::vector<int>{7});
}

TEST_CASE("config files allow comments, blanks, and CRLF") {
    const std::string path = write_temp("ok.cfg",
                                        "# run shape\n"
                                        "gen.sequences = 4\n"
                                        "\n"
                                        "model.d=16   # narrow\r\n"
                                        "  train.epochs=2  \n");
    Config c = Config::preset("desk");
    c.apply_file(path);
    CHECK(c.geti("gen.sequences") == 4);
    CHECK(c.geti("model.d") == 16);
    CHECK(c.geti("train.epochs") == 2);
    std::remove(path.c_str());
}

TEST_CASE("config file errors carry path and line number") {
    const std::string path = write_temp("bad.cfg",
                                        "gen.sequences=4\n"
                                        "gen.sequences\n");
    Config c = Config::preset("desk");
    CHECK_THROWS_WITH_AS(c.apply_file(path), doctest::Contains(":2)"),
                         ConfigError);
    CHECK_THROWS_AS(c.apply_file("does_not_exist.cfg"), ConfigError);
    std::remove(path.c_str());

    const std::string path2 = write_temp("bad2.cfg", "who.knows=1\n");
    CHECK_THROWS_WITH_AS(c.apply_file(path2),
                         doctest::Contains(("(" + path2 + ":1)").c_str()),
                         ConfigError);
    std::remove(path2.c_str());
}

TEST_CASE("whitespace around key=value inside files is trimmed") {
    // apply() itself is strict; the trimming happens at file level, so a key
    // with an interior space still fails.
    const std::string path = write_temp("sp.cfg", "gen. sequences=4\n");
    Config c = Config::preset("desk");
    CHECK_THROWS_AS(c.apply_file(path), ConfigError);
    std::remove(path.c_str());
}
