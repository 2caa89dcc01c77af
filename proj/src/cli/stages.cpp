#include "gazesim/cli/stages.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazesim/data/dataset.hpp"
#include "gazesim/data/synth.hpp"
#include "gazesim/metrics/metrics.hpp"
#include "gazesim/model/model.hpp"
#include "gazesim/post/gaze_post.hpp"
#include "gazesim/sim/simulator.hpp"
#include "gazesim/train/trainer.hpp"
#include "gazesim/util/errors.hpp"
#include "json.hpp"

namespace gazesim {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string seq_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%04d", i);
    return buf;
}

std::string run_name(int r) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run_%02d", r);
    return buf;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// A stage directory with a manifest is done; refuse to touch it again.
void claim_stage(const fs::path& dir) {
    if (fs::exists(dir / "manifest.json"))
        throw ConfigError("'" + dir.string() +
                          "' already holds finished artifacts; outputs are "
                          "write-once, pick a fresh --out directory");
    fs::create_directories(dir);
}

void write_manifest(const fs::path& dir, const std::string& stage,
                    const Config& cfg, std::vector<std::string> files) {
    std::sort(files.begin(), files.end());
    json m;
    m["stage"] = stage;
    m["seed"] = cfg.getu("seed");
    m["config"] = cfg.all();
    m["files"] = files;
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << m.dump(1) << "\n";
}

json require_stage(const fs::path& out_dir, const std::string& sub,
                   const std::string& command) {
    const fs::path path = out_dir / sub / "manifest.json";
    std::ifstream in(path);
    if (!in)
        throw PrereqError("no " + sub + " artifacts under '" +
                          out_dir.string() + "'; run `gazesim " + command +
                          "` first");
    json m;
    in >> m;
    return m;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    json j;
    in >> j;
    return j;
}

// Dataset shape as echoed into the data manifest, so the downstream stages
// always agree with what was actually generated.
struct DataShape {
    int sequences = 0;
    int subjects = 0;
    double duration = 0;
    double fps = 0;
    double graph_rate = 0;
    double gaze_rate = 0;
};

DataShape data_shape(const json& data_manifest) {
    const json& c = data_manifest.at("config");
    DataShape s;
    s.sequences = std::stoi(c.at("gen.sequences").get<std::string>());
    s.subjects = std::stoi(c.at("gen.subjects").get<std::string>());
    s.duration = std::stod(c.at("gen.duration").get<std::string>());
    s.fps = std::stod(c.at("gen.fps").get<std::string>());
    s.graph_rate = std::stod(c.at("gen.graph_rate").get<std::string>());
    s.gaze_rate = std::stod(c.at("gen.gaze_rate").get<std::string>());
    return s;
}

int upsample_factor(double fps, double graph_rate) {
    const double f = graph_rate / fps;
    const long r = std::lround(f);
    if (r < 1 || std::fabs(f - static_cast<double>(r)) > 1e-9)
        throw ConfigError("graph rate " + std::to_string(graph_rate) +
                          " must be an integer multiple of the frame rate " +
                          std::to_string(fps));
    return static_cast<int>(r);
}

std::string subject_gaze_file(int k) {
    return k == 0 ? "gaze.csv" : "gaze_s" + std::to_string(k) + ".csv";
}

std::vector<FrameData> load_seq_frames(const fs::path& data_dir, int seq,
                                       int factor) {
    const fs::path d = data_dir / seq_name(seq);
    auto frames = load_frames((d / "detections.jsonl").string(),
                              (d / "masks.jsonl").string());
    return upsample_frames(frames, factor);
}

ModelConfig model_config_from(const Config& cfg) {
    ModelConfig mc;
    mc.d = cfg.geti("model.d");
    mc.L = cfg.geti("model.L");
    mc.ffn_hidden = cfg.geti("model.ffn_hidden");
    mc.variant = cfg.gets("model.variant");
    mc.head = cfg.gets("model.head");
    mc.mdn_k = cfg.geti("model.mdn_k");
    mc.delta_max = cfg.getd("model.delta_max");
    mc.T = cfg.geti("model.T");
    mc.t_offsets = cfg.get_int_list("model.t_offsets");
    return mc;
}

GazeTrace slice_trace(const GazeTrace& t, size_t begin, size_t end) {
    end = std::min(end, t.size());
    begin = std::min(begin, end);
    GazeTrace s;
    s.rate = t.rate;
    s.t0 = t.t_at(begin);
    s.x.assign(t.x.begin() + begin, t.x.begin() + end);
    s.y.assign(t.y.begin() + begin, t.y.begin() + end);
    if (!t.valid.empty())
        s.valid.assign(t.valid.begin() + begin, t.valid.begin() + end);
    return s;
}

// Train/validation sequence split: the tail of the index range validates.
std::pair<std::vector<int>, std::vector<int>> split_sequences(
    int n_seq, double val_fraction) {
    int n_val = 0;
    if (n_seq >= 2 && val_fraction > 0) {
        n_val = std::max(1, static_cast<int>(std::lround(val_fraction *
                                                         n_seq)));
        n_val = std::min(n_val, n_seq - 1);
    }
    std::vector<int> train_ids, val_ids;
    for (int i = 0; i < n_seq - n_val; ++i) train_ids.push_back(i);
    for (int i = n_seq - n_val; i < n_seq; ++i) val_ids.push_back(i);
    return {train_ids, val_ids};
}

struct Sidecar {
    int warmup = 0;
    int horizon = 0;
    int runs = 0;
    int salience_runs = 0;
    double rate = 0;
    std::uint64_t seed_start = 0;
};

Sidecar read_sidecar(const fs::path& sim_dir, int seq) {
    const json j = read_json(sim_dir / seq_name(seq) / "sidecar.json");
    Sidecar s;
    s.warmup = j.at("warmup").get<int>();
    s.horizon = j.at("horizon").get<int>();
    s.runs = j.at("runs").get<int>();
    s.salience_runs = j.at("salience_runs").get<int>();
    s.rate = j.at("rate").get<double>();
    s.seed_start = j.at("seed_start").get<std::uint64_t>();
    return s;
}

// Mixture shells reconstructed from mixtures.jsonl: only the per-object
// mass survives serialization, which is all the salience ranking needs.
std::vector<Rollout> load_mixture_rollouts(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<Rollout> runs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Rollout r;
        for (const json& step : j.at("steps")) {
            StepMixture sm;
            for (const json& comp : step) {
                GmmComponent c;
                c.det_index = comp.at(0).get<int>();
                c.pi = comp.at(1).get<double>();
                c.type = NodeType::Vehicle;  // any object type
                sm.comps.push_back(c);
            }
            r.mixtures.push_back(std::move(sm));
        }
        runs.push_back(std::move(r));
    }
    return runs;
}

std::vector<Fixation> load_pooled_fixations(
    const fs::path& dir, const std::vector<std::string>& names) {
    std::vector<Fixation> all;
    for (const std::string& n : names) {
        auto fx = load_fixations_csv((dir / n).string());
        all.insert(all.end(), fx.begin(), fx.end());
    }
    return all;
}

// Hazard AOI: the hazard track's position at hazard onset.
struct Aoi {
    double x = 0, y = 0, onset = 0;
};

std::optional<Aoi> hazard_aoi(const json& meta) {
    const json& hazards = meta.at("hazards");
    if (hazards.empty()) return std::nullopt;
    const json& h = hazards.at(0);
    const int track = h.at("track").get<int>();
    const double onset = h.at("onset").get<double>();
    const double duration = meta.at("duration").get<double>();
    TrackSpec spec;
    for (const json& wp : meta.at("tracks").at(track).at("waypoints"))
        spec.waypoints.emplace_back(wp.at(0).get<double>(),
                                    wp.at(1).get<double>());
    const auto [x, y] = track_position(spec, onset, duration);
    return Aoi{x, y, onset};
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? fmt(*v) : std::string();
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

void stage_gen(const Config& cfg, const std::string& out_dir) {
    const fs::path dir = fs::path(out_dir) / "data";
    claim_stage(dir);

    SynthConfig sc;
    sc.sequences = cfg.geti("gen.sequences");
    sc.duration = cfg.getd("gen.duration");
    sc.fps = cfg.getd("gen.fps");
    sc.graph_rate = cfg.getd("gen.graph_rate");
    sc.gaze_rate = cfg.getd("gen.gaze_rate");
    sc.min_objects = cfg.geti("gen.min_objects");
    sc.max_objects = cfg.geti("gen.max_objects");
    sc.subjects = cfg.geti("gen.subjects");
    sc.seed = cfg.getu("seed");
    const std::string policy = cfg.gets("gen.policy");
    if (policy == "attend_nearest_hazard")
        sc.policy.kind = GazePolicy::Kind::AttendNearestHazard;
    else if (policy == "center_bias")
        sc.policy.kind = GazePolicy::Kind::CenterBias;
    else
        throw ConfigError("gen.policy must be attend_nearest_hazard or "
                          "center_bias, got '" + policy + "'");
    upsample_factor(sc.fps, sc.graph_rate);  // fail early on a bad ratio

    generate_dataset(dir.string(), sc, cfg.geti("jobs"));

    std::vector<std::string> files;
    for (int i = 0; i < sc.sequences; ++i) {
        const std::string s = seq_name(i);
        files.push_back(s + "/detections.jsonl");
        files.push_back(s + "/masks.jsonl");
        files.push_back(s + "/attended.csv");
        files.push_back(s + "/meta.json");
        for (int k = 0; k < sc.subjects; ++k)
            files.push_back(s + "/" + subject_gaze_file(k));
    }
    write_manifest(dir, "gen", cfg, files);
}

void stage_train(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    const fs::path dir = out / "model";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);
    const int factor = upsample_factor(ds.fps, ds.graph_rate);

    TrainConfig tc;
    tc.model = model_config_from(cfg);
    tc.base_lr = cfg.getd("train.base_lr");
    tc.odn_lr_scale = cfg.getd("train.odn_lr_scale");
    tc.weight_decay = cfg.getd("train.weight_decay");
    tc.batch_size = cfg.geti("train.batch_size");
    tc.epochs = cfg.geti("train.epochs");
    tc.seed = cfg.getu("seed");
    const int stride = cfg.geti("train.stride");

    const auto [train_ids, val_ids] =
        split_sequences(ds.sequences, cfg.getd("train.val_fraction"));

    const fs::path data_dir = out / "data";
    std::vector<WindowSample> train_set, val_set;
    for (int split = 0; split < 2; ++split) {
        const auto& ids = split == 0 ? train_ids : val_ids;
        auto& sink = split == 0 ? train_set : val_set;
        for (int i : ids) {
            const auto frames = load_seq_frames(data_dir, i, factor);
            for (int k = 0; k < ds.subjects; ++k) {
                const auto raw = load_gaze_csv(
                    (data_dir / seq_name(i) / subject_gaze_file(k)).string());
                const auto gaze = preprocess_gaze(raw, ds.graph_rate);
                auto windows = make_windows(frames, gaze, tc.model.T,
                                            tc.model.t_offsets, stride);
                std::move(windows.begin(), windows.end(),
                          std::back_inserter(sink));
            }
        }
    }

    TrainResult res = train(tc, train_set, val_set);

    save_checkpoint((dir / "checkpoint.json").string(), res.model);
    {
        std::ofstream rep(dir / "train_report.json");
        rep << train_report_json(tc, res.report);
    }
    {
        json split;
        split["train_sequences"] = train_ids;
        split["val_sequences"] = val_ids;
        split["train_windows"] = train_set.size();
        split["val_windows"] = val_set.size();
        std::ofstream sj(dir / "split.json");
        sj << split.dump(1) << "\n";
    }

    if (res.report.aborted)
        // the last-good checkpoint and report were kept, but the stage still
        // failed: no manifest, so a rerun into a fresh directory is expected
        throw DataError("training aborted: " + res.report.abort_reason);

    write_manifest(dir, "train", cfg,
                   {"checkpoint.json", "train_report.json", "split.json"});
}

void stage_simulate(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    require_stage(out, "model", "train");
    const fs::path dir = out / "sim";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);
    const int factor = upsample_factor(ds.fps, ds.graph_rate);

    GazeModel model = load_checkpoint((out / "model" / "checkpoint.json").string());
    const int T = model.config().T;

    const int horizon = cfg.geti("sim.horizon");
    const int runs = cfg.geti("sim.runs");
    const int salience_runs = cfg.geti("sim.salience_runs");
    if (runs < 1) throw ConfigError("sim.runs must be at least 1");
    if (salience_runs < 0) throw ConfigError("sim.salience_runs must be >= 0");
    const int total = std::max(runs, salience_runs);
    const std::uint64_t seed0 = cfg.getu("seed");

    const fs::path data_dir = out / "data";
    std::vector<std::string> files;
    for (int i = 0; i < ds.sequences; ++i) {
        const auto frames = load_seq_frames(data_dir, i, factor);
        const auto warm_raw = load_gaze_csv(
            (data_dir / seq_name(i) / "gaze.csv").string());
        const auto warm = preprocess_gaze(warm_raw, ds.graph_rate);

        RolloutConfig rc;
        rc.horizon = horizon;
        rc.record_mixture = true;
        rc.seed = seed0 + static_cast<std::uint64_t>(i) *
                              static_cast<std::uint64_t>(total);
        const auto rolls = multi_run(model, frames, warm, total, rc);

        const std::string s = seq_name(i);
        const fs::path sdir = dir / s;
        fs::create_directories(sdir);
        for (int r = 0; r < runs; ++r) {
            const std::string name = run_name(r) + ".csv";
            save_gaze_csv((sdir / name).string(), rolls[r].trace);
            files.push_back(s + "/" + name);
        }
        {
            std::ofstream mix(sdir / "mixtures.jsonl");
            for (int r = 0; r < salience_runs; ++r) {
                json steps = json::array();
                for (const StepMixture& sm : rolls[r].mixtures) {
                    json step = json::array();
                    for (const GmmComponent& c : sm.comps)
                        if (c.det_index >= 0 && c.type != NodeType::Gaze &&
                            c.type != NodeType::Structure)
                            step.push_back({c.det_index, c.pi});
                    steps.push_back(std::move(step));
                }
                json line;
                line["run"] = r;
                line["steps"] = std::move(steps);
                mix << line.dump() << "\n";
            }
            files.push_back(s + "/mixtures.jsonl");
        }
        {
            json sc;
            sc["warmup"] = T;
            sc["horizon"] = horizon;
            sc["runs"] = runs;
            sc["salience_runs"] = salience_runs;
            sc["rate"] = ds.graph_rate;
            sc["seed_start"] = rc.seed;
            std::ofstream side(sdir / "sidecar.json");
            side << sc.dump(1) << "\n";
            files.push_back(s + "/sidecar.json");
        }
    }
    write_manifest(dir, "simulate", cfg, files);
}

void stage_fixate(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    require_stage(out, "sim", "simulate");
    const fs::path dir = out / "fix";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);
    FixationParams fp;
    fp.t1 = cfg.getd("post.fix_t1");
    fp.t2 = cfg.getd("post.fix_t2");
    fp.min_dur = cfg.getd("post.fix_min_dur");

    std::vector<std::string> files;
    for (int i = 0; i < ds.sequences; ++i) {
        const std::string s = seq_name(i);
        const Sidecar sc = read_sidecar(out / "sim", i);
        const fs::path fdir = dir / s;
        fs::create_directories(fdir);

        for (int r = 0; r < sc.runs; ++r) {
            const auto tr = load_gaze_csv(
                (out / "sim" / s / (run_name(r) + ".csv")).string());
            const auto tail = slice_trace(tr, sc.warmup, tr.size());
            const auto fx = detect_fixations(tail, fp);
            const std::string name = run_name(r) + "_fixations.csv";
            save_fixations_csv((fdir / name).string(), fx);
            files.push_back(s + "/" + name);
        }
        for (int k = 0; k < ds.subjects; ++k) {
            const auto raw = load_gaze_csv(
                (out / "data" / s / subject_gaze_file(k)).string());
            const auto gaze = preprocess_gaze(raw, sc.rate);
            const auto tail = slice_trace(
                gaze, sc.warmup,
                static_cast<size_t>(sc.warmup) + sc.horizon);
            const auto fx = detect_fixations(tail, fp);
            const std::string name =
                "gt_s" + std::to_string(k) + "_fixations.csv";
            save_fixations_csv((fdir / name).string(), fx);
            files.push_back(s + "/" + name);
        }
    }
    write_manifest(dir, "fixate", cfg, files);
}

void stage_saliency(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    require_stage(out, "model", "train");
    require_stage(out, "sim", "simulate");
    require_stage(out, "fix", "fixate");
    const fs::path dir = out / "saliency";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);
    SaliencyParams sp;
    sp.width = cfg.geti("post.sal_width");
    sp.height = cfg.geti("post.sal_height");

    std::vector<std::string> files;
    for (int i = 0; i < ds.sequences; ++i) {
        const std::string s = seq_name(i);
        const Sidecar sc = read_sidecar(out / "sim", i);
        const fs::path fdir = out / "fix" / s;
        const fs::path sdir = dir / s;
        fs::create_directories(sdir);

        std::vector<std::string> gen_names, gt_names;
        for (int r = 0; r < sc.runs; ++r)
            gen_names.push_back(run_name(r) + "_fixations.csv");
        for (int k = 0; k < ds.subjects; ++k)
            gt_names.push_back("gt_s" + std::to_string(k) + "_fixations.csv");

        const Tensor gen_map =
            build_saliency_map(load_pooled_fixations(fdir, gen_names), sp);
        const Tensor gt_map =
            build_saliency_map(load_pooled_fixations(fdir, gt_names), sp);
        save_grid_csv((sdir / "gen_saliency.csv").string(), gen_map);
        save_pgm((sdir / "gen_saliency.pgm").string(), gen_map);
        save_grid_csv((sdir / "gt_saliency.csv").string(), gt_map);
        save_pgm((sdir / "gt_saliency.pgm").string(), gt_map);
        files.push_back(s + "/gen_saliency.csv");
        files.push_back(s + "/gen_saliency.pgm");
        files.push_back(s + "/gt_saliency.csv");
        files.push_back(s + "/gt_saliency.pgm");

        {
            std::ofstream osal(sdir / "object_salience.csv");
            osal << "step,det_index,score\n";
            if (sc.salience_runs > 0) {
                const auto shells = load_mixture_rollouts(
                    out / "sim" / s / "mixtures.jsonl");
                const auto ranked = rank_object_salience(shells);
                char buf[96];
                for (size_t step = 0; step < ranked.size(); ++step)
                    for (size_t j = 0; j < ranked[step].det_index.size(); ++j) {
                        std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g\n", step,
                                      ranked[step].det_index[j],
                                      ranked[step].score[j]);
                        osal << buf;
                    }
            }
            files.push_back(s + "/object_salience.csv");
        }
    }

    // Center-bias style baseline fitted on the training split's ground truth.
    const json split = read_json(out / "model" / "split.json");
    std::vector<Fixation> pool;
    for (int i : split.at("train_sequences").get<std::vector<int>>()) {
        std::vector<std::string> names;
        for (int k = 0; k < ds.subjects; ++k)
            names.push_back("gt_s" + std::to_string(k) + "_fixations.csv");
        const auto fx = load_pooled_fixations(out / "fix" / seq_name(i), names);
        pool.insert(pool.end(), fx.begin(), fx.end());
    }
    const Tensor baseline = fit_gaussian_baseline(pool, sp.width, sp.height);
    save_grid_csv((dir / "baseline.csv").string(), baseline);
    files.push_back("baseline.csv");

    write_manifest(dir, "saliency", cfg, files);
}

void stage_evaluate(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    require_stage(out, "sim", "simulate");
    require_stage(out, "fix", "fixate");
    require_stage(out, "saliency", "saliency");
    const fs::path dir = out / "eval";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);
    const double fw = cfg.getd("eval.frame_w");
    const double fh = cfg.getd("eval.frame_h");
    const double aoi_radius = cfg.getd("eval.aoi_radius");

    const Tensor baseline =
        load_grid_csv((out / "saliency" / "baseline.csv").string());

    const auto dtw_metric = [&](const GazeTrace& a, const GazeTrace& b) {
        return dtw(a, b, fw, fh);
    };
    const auto lev_metric = [](const GazeTrace& a, const GazeTrace& b) {
        return static_cast<double>(levenshtein_scanpath(a, b));
    };

    std::vector<std::string> files;
    std::ofstream table(dir / "metrics.csv");
    table << "seq,dtw_mean,dtw_std,dtw_gt_loo,tc_mean,tc_std,lev_mean,lev_std,"
             "fix_count_gen,fix_rate_gen,fix_dur_gen,fix_count_gt,fix_rate_gt,"
             "fix_dur_gt,tff_gen,tff_gen_hits,tff_gt,tff_gt_hits,"
             "nss,ig,auc,band_ratio_gen,band_ratio_gt\n";

    // pooled across sequences for the dynamics and spectrum outputs
    std::vector<GazeTrace> dyn_gen, dyn_gt;
    std::vector<std::vector<double>> dyn_gen_events, dyn_gt_events;
    std::vector<Psd> psd_gen, psd_gt;

    for (int i = 0; i < ds.sequences; ++i) {
        const std::string s = seq_name(i);
        const Sidecar sc = read_sidecar(out / "sim", i);

        std::vector<GazeTrace> gen;
        for (int r = 0; r < sc.runs; ++r) {
            const auto tr = load_gaze_csv(
                (out / "sim" / s / (run_name(r) + ".csv")).string());
            gen.push_back(slice_trace(tr, sc.warmup, tr.size()));
        }
        std::vector<GazeTrace> gt;
        for (int k = 0; k < ds.subjects; ++k) {
            const auto raw = load_gaze_csv(
                (out / "data" / s / subject_gaze_file(k)).string());
            const auto g = preprocess_gaze(raw, sc.rate);
            gt.push_back(slice_trace(
                g, sc.warmup, static_cast<size_t>(sc.warmup) + sc.horizon));
        }

        json detail;
        detail["seq"] = s;

        const auto run_stats =
            [&](const std::function<double(const GazeTrace&,
                                           const GazeTrace&)>& metric,
                bool lower) -> std::optional<PairStats> {
            try {
                return pair_best_match(gen, gt, metric, lower);
            } catch (const Error&) {
                return std::nullopt;
            }
        };

        const auto dtw_s = run_stats(dtw_metric, true);
        const auto tc_s = run_stats(
            [](const GazeTrace& a, const GazeTrace& b) {
                return temporal_correlation(a, b);
            },
            false);
        const auto lev_s = run_stats(lev_metric, true);

        std::optional<double> dtw_loo;
        if (gt.size() >= 2) {
            try {
                dtw_loo = pair_best_match(gt, gt, dtw_metric, true, true).mean;
            } catch (const Error&) {
            }
        }

        if (dtw_s) detail["dtw_best"] = dtw_s->best;
        if (tc_s) detail["tc_best"] = tc_s->best;
        if (lev_s) detail["lev_best"] = lev_s->best;

        // fixation statistics averaged over runs / subjects
        const double tail_dur = static_cast<double>(sc.horizon) / sc.rate;
        const auto fix_summary = [&](const std::vector<std::string>& names)
            -> std::array<std::optional<double>, 3> {
            std::vector<double> counts, rates, durs;
            for (const std::string& n : names) {
                const auto fx =
                    load_fixations_csv((out / "fix" / s / n).string());
                const auto st = fixation_stats(fx, tail_dur);
                counts.push_back(st.count);
                rates.push_back(st.rate);
                if (st.mean_duration) durs.push_back(*st.mean_duration);
            }
            std::array<std::optional<double>, 3> r;
            if (!counts.empty()) {
                r[0] = mean_of(counts);
                r[1] = mean_of(rates);
            }
            if (!durs.empty()) r[2] = mean_of(durs);
            return r;
        };
        std::vector<std::string> gen_fx_names, gt_fx_names;
        for (int r = 0; r < sc.runs; ++r)
            gen_fx_names.push_back(run_name(r) + "_fixations.csv");
        for (int k = 0; k < ds.subjects; ++k)
            gt_fx_names.push_back("gt_s" + std::to_string(k) +
                                  "_fixations.csv");
        const auto fix_gen = fix_summary(gen_fx_names);
        const auto fix_gt = fix_summary(gt_fx_names);

        // time to first fixation on the first hazard
        const json meta = read_json(out / "data" / s / "meta.json");
        const auto aoi = hazard_aoi(meta);
        std::optional<double> tff_gen, tff_gt;
        int tff_gen_hits = 0, tff_gt_hits = 0;
        if (aoi) {
            const auto tff_summary =
                [&](const std::vector<std::string>& names, int& hits)
                -> std::optional<double> {
                std::vector<double> vals;
                for (const std::string& n : names) {
                    const auto fx =
                        load_fixations_csv((out / "fix" / s / n).string());
                    const auto t =
                        aoi_tff(fx, aoi->x, aoi->y, aoi_radius);
                    if (t) vals.push_back(*t);
                }
                hits = static_cast<int>(vals.size());
                if (vals.empty()) return std::nullopt;
                return mean_of(vals);
            };
            tff_gen = tff_summary(gen_fx_names, tff_gen_hits);
            tff_gt = tff_summary(gt_fx_names, tff_gt_hits);
            detail["aoi"] = {{"x", aoi->x}, {"y", aoi->y},
                             {"onset", aoi->onset}};
        }

        // saliency scores of the pooled generated map against GT fixations
        std::optional<double> nss_v, ig_v, auc_v;
        {
            const Tensor gen_map = load_grid_csv(
                (out / "saliency" / s / "gen_saliency.csv").string());
            const auto gt_fx = load_pooled_fixations(out / "fix" / s,
                                                     gt_fx_names);
            try {
                nss_v = nss(gen_map, gt_fx);
            } catch (const Error&) {
            }
            try {
                ig_v = information_gain(gen_map, baseline, gt_fx);
            } catch (const Error&) {
            }
            try {
                auc_v = auc_judd(gen_map, gt_fx);
            } catch (const Error&) {
            }
        }

        // spectral shape of the rollout ensemble vs the subject ensemble
        std::optional<double> br_gen, br_gt;
        try {
            const Psd p = residual_psd(gen);
            psd_gen.push_back(p);
            br_gen = band_ratio(p);
        } catch (const Error&) {
        }
        try {
            const Psd p = residual_psd(gt);
            psd_gt.push_back(p);
            br_gt = band_ratio(p);
        } catch (const Error&) {
        }

        // event-aligned displacement pools across every sequence
        std::vector<double> events;
        for (const json& h : meta.at("hazards")) {
            const double onset = h.at("onset").get<double>();
            events.push_back(onset);
        }
        for (const auto& tr : gen) {
            dyn_gen.push_back(tr);
            dyn_gen_events.push_back(events);
        }
        for (const auto& tr : gt) {
            dyn_gt.push_back(tr);
            dyn_gt_events.push_back(events);
        }

        table << s << ',' << (dtw_s ? fmt(dtw_s->mean) : "") << ','
              << (dtw_s ? fmt(dtw_s->stddev) : "") << ',' << opt_cell(dtw_loo)
              << ',' << (tc_s ? fmt(tc_s->mean) : "") << ','
              << (tc_s ? fmt(tc_s->stddev) : "") << ','
              << (lev_s ? fmt(lev_s->mean) : "") << ','
              << (lev_s ? fmt(lev_s->stddev) : "") << ',' << opt_cell(fix_gen[0])
              << ',' << opt_cell(fix_gen[1]) << ',' << opt_cell(fix_gen[2])
              << ',' << opt_cell(fix_gt[0]) << ',' << opt_cell(fix_gt[1]) << ','
              << opt_cell(fix_gt[2]) << ',' << opt_cell(tff_gen) << ','
              << tff_gen_hits << ',' << opt_cell(tff_gt) << ',' << tff_gt_hits
              << ',' << opt_cell(nss_v) << ',' << opt_cell(ig_v) << ','
              << opt_cell(auc_v) << ',' << opt_cell(br_gen) << ','
              << opt_cell(br_gt) << '\n';

        const std::string dname = "detail_" + s + ".json";
        std::ofstream dj(dir / dname);
        dj << detail.dump(1) << "\n";
        files.push_back(dname);
    }
    table.close();
    files.push_back("metrics.csv");

    {
        std::ofstream dyn(dir / "dynamics.csv");
        dyn << "offset_sec,gen_mean_disp,gt_mean_disp\n";
        std::optional<GazeDynamics> dg, dt;
        try {
            dg = gaze_state_dynamics(dyn_gen, dyn_gen_events);
        } catch (const Error&) {
        }
        try {
            dt = gaze_state_dynamics(dyn_gt, dyn_gt_events);
        } catch (const Error&) {
        }
        const size_t n = dg ? dg->offset_sec.size()
                            : (dt ? dt->offset_sec.size() : 0);
        for (size_t k = 0; k < n; ++k) {
            const double off =
                dg ? dg->offset_sec[k] : dt->offset_sec[k];
            dyn << fmt(off) << ','
                << (dg ? fmt(dg->mean_disp[k]) : "") << ','
                << (dt ? fmt(dt->mean_disp[k]) : "") << '\n';
        }
        files.push_back("dynamics.csv");
    }

    {
        // sequences share horizon and rate, so the frequency grids agree
        const auto average = [](const std::vector<Psd>& ps) -> Psd {
            Psd avg;
            if (ps.empty()) return avg;
            avg = ps[0];
            for (size_t i = 1; i < ps.size(); ++i)
                for (size_t k = 0; k < avg.power.size(); ++k)
                    avg.power[k] += ps[i].power[k];
            for (double& p : avg.power)
                p /= static_cast<double>(ps.size());
            return avg;
        };
        const Psd ag = average(psd_gen);
        const Psd at = average(psd_gt);
        std::ofstream psd(dir / "psd.csv");
        psd << "freq_hz,gen_power,gt_power\n";
        const size_t n = std::max(ag.freq.size(), at.freq.size());
        for (size_t k = 0; k < n; ++k) {
            const double f =
                k < ag.freq.size() ? ag.freq[k] : at.freq[k];
            psd << fmt(f) << ','
                << (k < ag.power.size() ? fmt(ag.power[k]) : "") << ','
                << (k < at.power.size() ? fmt(at.power[k]) : "") << '\n';
        }
        files.push_back("psd.csv");
    }

    write_manifest(dir, "evaluate", cfg, files);
}

namespace {

// Minimal deterministic SVG plotting.
struct SvgPanel {
    double x0, y0, w, h;  // frame in page coordinates
    std::string title;
};

std::string svg_poly(const std::vector<std::pair<double, double>>& pts,
                     const std::string& color) {
    std::string s = "<polyline fill=\"none\" stroke=\"" + color +
                    "\" stroke-width=\"1\" points=\"";
    char buf[64];
    for (const auto& [x, y] : pts) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x, y);
        s += buf;
    }
    s += "\"/>\n";
    return s;
}

// Maps data points into the panel with padded linear axes.
std::vector<std::pair<double, double>> map_into(
    const SvgPanel& p, const std::vector<double>& xs,
    const std::vector<double>& ys, double xmin, double xmax, double ymin,
    double ymax) {
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1;
    std::vector<std::pair<double, double>> out;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double fx = (xs[i] - xmin) / (xmax - xmin);
        const double fy = (ys[i] - ymin) / (ymax - ymin);
        out.emplace_back(p.x0 + fx * p.w, p.y0 + p.h - fy * p.h);
    }
    return out;
}

std::string svg_frame(const SvgPanel& p) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\""
                  " fill=\"none\" stroke=\"#888\"/>\n"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\""
                  " font-family=\"sans-serif\">%s</text>\n",
                  p.x0, p.y0, p.w, p.h, p.x0, p.y0 - 5, p.title.c_str());
    return buf;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    Csv csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            cells.push_back(line.substr(
                start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            csv.header = std::move(cells);
            first = false;
        } else {
            csv.rows.push_back(std::move(cells));
        }
    }
    return csv;
}

}  // namespace

void stage_report(const Config& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const json data_m = require_stage(out, "data", "gen");
    require_stage(out, "sim", "simulate");
    require_stage(out, "fix", "fixate");
    require_stage(out, "saliency", "saliency");
    require_stage(out, "eval", "evaluate");
    const fs::path dir = out / "report";
    claim_stage(dir);

    const DataShape ds = data_shape(data_m);

    // summary.csv: column means over the per-sequence table
    const Csv metrics = read_csv(out / "eval" / "metrics.csv");
    {
        std::ofstream sum(dir / "summary.csv");
        sum << "metric,mean,sequences\n";
        for (size_t c = 1; c < metrics.header.size(); ++c) {
            std::vector<double> vals;
            for (const auto& row : metrics.rows) {
                if (c >= row.size() || row[c].empty()) continue;
                vals.push_back(std::strtod(row[c].c_str(), nullptr));
            }
            sum << metrics.header[c] << ','
                << (vals.empty() ? "" : fmt(mean_of(vals))) << ','
                << vals.size() << '\n';
        }
    }

    // report.svg: sample rollout, event-aligned dynamics, spectrum, saliency
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" "
           "height=\"620\" viewBox=\"0 0 900 620\">\n";
    svg += "<rect width=\"900\" height=\"620\" fill=\"white\"/>\n";

    const std::string s0 = seq_name(0);
    const Sidecar sc = read_sidecar(out / "sim", 0);

    {  // panel A: horizontal gaze, subject vs one rollout
        SvgPanel p{50, 30, 380, 240, "gaze x vs time (seq 0)"};
        svg += svg_frame(p);
        const auto gt_raw =
            load_gaze_csv((out / "data" / s0 / "gaze.csv").string());
        const auto gt = preprocess_gaze(gt_raw, sc.rate);
        const auto run = load_gaze_csv(
            (out / "sim" / s0 / (run_name(0) + ".csv")).string());
        std::vector<double> tg, xg, tr, xr;
        for (size_t i = 0; i < gt.size(); ++i) {
            tg.push_back(gt.t_at(i));
            xg.push_back(gt.x[i]);
        }
        for (size_t i = 0; i < run.size(); ++i) {
            tr.push_back(run.t_at(i));
            xr.push_back(run.x[i]);
        }
        const double tmax = std::max(tg.empty() ? 0.0 : tg.back(),
                                     tr.empty() ? 0.0 : tr.back());
        svg += svg_poly(map_into(p, tg, xg, 0, tmax, 0, 1), "#777777");
        svg += svg_poly(map_into(p, tr, xr, 0, tmax, 0, 1), "#d62728");
        // warmup boundary
        const double tb = static_cast<double>(sc.warmup) / sc.rate;
        const auto ln = map_into(p, {tb, tb}, {0, 1}, 0, tmax, 0, 1);
        svg += svg_poly(ln, "#2ca02c");
        svg += "<text x=\"55\" y=\"285\" font-size=\"10\" "
               "font-family=\"sans-serif\">grey: subject, red: rollout, "
               "green: warmup end</text>\n";
    }

    {  // panel B: event-aligned displacement
        SvgPanel p{500, 30, 350, 240, "displacement around hazard onset"};
        svg += svg_frame(p);
        const Csv dyn = read_csv(out / "eval" / "dynamics.csv");
        std::vector<double> off, g, t;
        for (const auto& row : dyn.rows) {
            if (row.size() < 3) continue;
            off.push_back(std::strtod(row[0].c_str(), nullptr));
            g.push_back(row[1].empty()
                            ? std::nan("")
                            : std::strtod(row[1].c_str(), nullptr));
            t.push_back(row[2].empty()
                            ? std::nan("")
                            : std::strtod(row[2].c_str(), nullptr));
        }
        double ymax = 1e-6;
        for (double v : g)
            if (std::isfinite(v)) ymax = std::max(ymax, v);
        for (double v : t)
            if (std::isfinite(v)) ymax = std::max(ymax, v);
        if (!off.empty()) {
            const auto clean = [&](const std::vector<double>& v) {
                std::vector<double> xs, ys;
                for (size_t i = 0; i < v.size(); ++i)
                    if (std::isfinite(v[i])) {
                        xs.push_back(off[i]);
                        ys.push_back(v[i]);
                    }
                return std::pair{xs, ys};
            };
            const auto [gx, gy] = clean(g);
            const auto [tx, ty] = clean(t);
            if (!gx.empty())
                svg += svg_poly(
                    map_into(p, gx, gy, off.front(), off.back(), 0, ymax),
                    "#d62728");
            if (!tx.empty())
                svg += svg_poly(
                    map_into(p, tx, ty, off.front(), off.back(), 0, ymax),
                    "#777777");
        }
    }

    {  // panel C: residual power spectrum (log10 power)
        SvgPanel p{50, 330, 380, 240, "residual PSD"};
        svg += svg_frame(p);
        const Csv psd = read_csv(out / "eval" / "psd.csv");
        std::vector<double> f, g, t;
        for (const auto& row : psd.rows) {
            if (row.size() < 3) continue;
            f.push_back(std::strtod(row[0].c_str(), nullptr));
            g.push_back(row[1].empty()
                            ? std::nan("")
                            : std::strtod(row[1].c_str(), nullptr));
            t.push_back(row[2].empty()
                            ? std::nan("")
                            : std::strtod(row[2].c_str(), nullptr));
        }
        const auto logged = [](std::vector<double> v) {
            for (double& x : v)
                x = std::isfinite(x) ? std::log10(x + 1e-20) : x;
            return v;
        };
        const auto lg = logged(g), lt = logged(t);
        double ymin = 0, ymax = -20;
        for (double v : lg)
            if (std::isfinite(v)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        for (double v : lt)
            if (std::isfinite(v)) {
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        if (!f.empty()) {
            const auto clean = [&](const std::vector<double>& v) {
                std::vector<double> xs, ys;
                for (size_t i = 0; i < v.size(); ++i)
                    if (std::isfinite(v[i])) {
                        xs.push_back(f[i]);
                        ys.push_back(v[i]);
                    }
                return std::pair{xs, ys};
            };
            const auto [gx, gy] = clean(lg);
            const auto [tx, ty] = clean(lt);
            if (!gx.empty())
                svg += svg_poly(
                    map_into(p, gx, gy, f.front(), f.back(), ymin, ymax),
                    "#d62728");
            if (!tx.empty())
                svg += svg_poly(
                    map_into(p, tx, ty, f.front(), f.back(), ymin, ymax),
                    "#777777");
        }
    }

    {  // panel D: pooled generated saliency with GT fixations on top
        SvgPanel p{500, 330, 350, 175, "generated saliency (seq 0)"};
        svg += svg_frame(p);
        const Tensor map = load_grid_csv(
            (out / "saliency" / s0 / "gen_saliency.csv").string());
        const int gw = 40, gh = 20;
        const int mw = static_cast<int>(map.cols);
        const int mh = static_cast<int>(map.rows);
        char buf[200];
        for (int gy = 0; gy < gh; ++gy)
            for (int gx = 0; gx < gw; ++gx) {
                // average the map cells falling into this coarse cell
                double acc = 0;
                int cnt = 0;
                const int x0 = gx * mw / gw, x1 = (gx + 1) * mw / gw;
                const int y0 = gy * mh / gh, y1 = (gy + 1) * mh / gh;
                for (int y = y0; y < std::max(y1, y0 + 1); ++y)
                    for (int x = x0; x < std::max(x1, x0 + 1); ++x)
                        if (y < mh && x < mw) {
                            acc += map.data[static_cast<size_t>(y) * mw + x];
                            ++cnt;
                        }
                const double v = cnt ? acc / cnt : 0.0;
                if (v < 1e-3) continue;
                std::snprintf(buf, sizeof(buf),
                              "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" "
                              "height=\"%.2f\" fill=\"#d62728\" "
                              "fill-opacity=\"%.3f\"/>\n",
                              p.x0 + p.w * gx / gw, p.y0 + p.h * gy / gh,
                              p.w / gw, p.h / gh, v);
                svg += buf;
            }
        std::vector<std::string> gt_names;
        for (int k = 0; k < ds.subjects; ++k)
            gt_names.push_back("gt_s" + std::to_string(k) + "_fixations.csv");
        const auto fx = load_pooled_fixations(out / "fix" / s0, gt_names);
        for (const Fixation& f : fx) {
            std::snprintf(buf, sizeof(buf),
                          "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" "
                          "fill=\"none\" stroke=\"#1f77b4\"/>\n",
                          p.x0 + f.x * p.w, p.y0 + f.y * p.h);
            svg += buf;
        }
    }

    svg += "</svg>\n";
    std::ofstream sv(dir / "report.svg");
    sv << svg;

    write_manifest(dir, "report", cfg, {"summary.csv", "report.svg"});
}

}  // namespace gazesim
