#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gazesim/train/trainer.hpp"
#include "json.hpp"

using namespace gazesim;

namespace {

// A car sweeping left to right with gaze tracking it (plus a static person),
// sliced into training windows. Learnable and cheap.
std::vector<WindowSample> toy_samples(int n_frames, int T, int stride,
                                      uint64_t seed) {
    Rng rng(seed);
    const std::vector<double> app_car = rng.unit_vector(kAppearanceDim);
    const std::vector<double> app_person = rng.unit_vector(kAppearanceDim);
    std::vector<FrameData> frames(n_frames);
    GazeTrace gaze;
    gaze.rate = 20.0;
    gaze.t0 = 0.0;
    for (int i = 0; i < n_frames; ++i) {
        const double u = static_cast<double>(i) / (n_frames - 1);
        const double cx = 0.2 + 0.6 * u;
        frames[i].detections.push_back(
            {"car", cx, 0.3, 0.08, 0.06, 0.9, 0.3, app_car});
        frames[i].detections.push_back(
            {"person", 0.7, 0.75, 0.05, 0.12, 0.8, 0.6, app_person});
        for (size_t c = kMaskW * kMaskH / 2; c < kMaskW * kMaskH; ++c)
            frames[i].mask[c] = 1.0;
        gaze.x.push_back(cx + 0.005 * std::sin(7.0 * i));
        gaze.y.push_back(0.3 + 0.005 * std::cos(5.0 * i));
    }
    return make_windows(frames, gaze, T, {1, 2}, stride);
}

ModelConfig tiny_model() {
    ModelConfig m;
    m.d = 8;
    m.L = 1;
    m.ffn_hidden = 16;
    m.T = 4;
    m.t_offsets = {1, 2};
    return m;
}

bool params_equal(const std::map<std::string, Tensor>& a,
                  const std::map<std::string, Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
        if (ia->first != ib->first) return false;
        if (ia->second.rows != ib->second.rows ||
            ia->second.cols != ib->second.cols)
            return false;
        if (ia->second.data != ib->second.data) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("make_batches shuffles, chunks and covers every index") {
    Rng r1(7), r2(7);
    auto b1 = make_batches(10, 4, r1);
    auto b2 = make_batches(10, 4, r2);
    CHECK(b1 == b2);
    REQUIRE(b1.size() == 3);
    CHECK(b1[0].size() == 4);
    CHECK(b1[1].size() == 4);
    CHECK(b1[2].size() == 2);

    std::vector<int> flat;
    for (const auto& b : b1) flat.insert(flat.end(), b.begin(), b.end());
    std::vector<int> iota(10);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(flat != iota);  // actually shuffled
    std::sort(flat.begin(), flat.end());
    CHECK(flat == iota);  // a permutation

    Rng r3(1);
    CHECK(make_batches(0, 4, r3).empty());
    CHECK_THROWS_AS(make_batches(5, 0, r3), ConfigError);
}

TEST_CASE("validate_select is argmin with ties to the earlier epoch") {
    CHECK(validate_select({3.0, 2.0, 2.5}) == 2);
    CHECK(validate_select({5.0, 4.0, 3.0}) == 3);
    CHECK(validate_select({2.0, 2.0}) == 1);
    CHECK(validate_select({1.5}) == 1);
    CHECK_THROWS_AS(validate_select({}), DimError);
}

TEST_CASE("training runs are bit-identical for the same config") {
    auto samples = toy_samples(12, 4, 1, 5);
    REQUIRE(samples.size() == 8);
    std::vector<WindowSample> tr(samples.begin(), samples.begin() + 6);
    std::vector<WindowSample> va(samples.begin() + 6, samples.end());

    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.seed = 17;
    auto a = train(cfg, tr, va);
    auto b = train(cfg, tr, va);
    CHECK(a.report.train_loss == b.report.train_loss);
    CHECK(a.report.val_loss == b.report.val_loss);
    CHECK(a.report.best_epoch == b.report.best_epoch);
    CHECK(params_equal(a.model.params().all(), b.model.params().all()));
    CHECK(train_report_json(cfg, a.report) == train_report_json(cfg, b.report));
}

TEST_CASE("one trainer batch equals a hand-rolled optimizer step") {
    auto samples = toy_samples(10, 4, 2, 21);
    REQUIRE(samples.size() >= 3);
    std::vector<WindowSample> three(samples.begin(), samples.begin() + 3);

    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.batch_size = 3;
    cfg.epochs = 1;
    cfg.seed = 9;
    auto res = train(cfg, three, three);
    REQUIRE(!res.report.aborted);
    REQUIRE(res.report.val_loss.size() == 1);

    // Replay the single step by hand, in the same shuffled order.
    GazeModel manual(cfg.model, cfg.seed);
    AdamConfig ac;
    ac.lr = cfg.base_lr;
    ac.weight_decay = cfg.weight_decay;
    ac.odn_lr_scale = cfg.odn_lr_scale;
    AdamOptimizer opt(ac);
    Rng rng(cfg.seed);
    auto batches = make_batches(three.size(), cfg.batch_size, rng);
    REQUIRE(batches.size() == 1);
    std::vector<const SceneGraph*> graphs;
    std::vector<std::pair<double, double>> targets;
    for (int i : batches[0]) {
        graphs.push_back(&three[static_cast<size_t>(i)].graph);
        targets.push_back(three[static_cast<size_t>(i)].target);
    }
    Tape t;
    std::map<std::string, Id> ids;
    auto f = manual.forward(t, merge_graphs(graphs), true, true, &ids);
    Id loss = manual.nll(t, f, targets);
    CHECK(t.val(loss).item() == res.report.train_loss[0]);
    t.backward(loss);
    std::map<std::string, Tensor> grads;
    for (const auto& [name, id] : ids)
        if (t.has_grad(id)) grads.emplace(name, t.grad(id));
    opt.step(manual.params(), grads);

    CHECK(params_equal(manual.params().all(), res.model.params().all()));
    CHECK(evaluate_nll(manual, three, 3) == res.report.val_loss[0]);
}

TEST_CASE("validation is read-only and repeatable") {
    auto samples = toy_samples(12, 4, 1, 31);
    std::vector<WindowSample> tr(samples.begin(), samples.begin() + 5);
    std::vector<WindowSample> va(samples.begin() + 5, samples.end());

    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.seed = 40;
    auto res = train(cfg, tr, va);
    REQUIRE(!res.report.aborted);

    auto before = res.model.params().all();
    const double v1 = evaluate_nll(res.model, va, 2);
    const double v2 = evaluate_nll(res.model, va, 2);
    CHECK(v1 == v2);
    CHECK(params_equal(before, res.model.params().all()));
    CHECK_THROWS_AS(evaluate_nll(res.model, {}, 2), DataError);
}

TEST_CASE("overfitting one window drops the NLL by more than a nat") {
    auto samples = toy_samples(10, 4, 1, 99);
    REQUIRE(!samples.empty());
    std::vector<WindowSample> one = {samples[0]};

    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.base_lr = 0.03;
    cfg.batch_size = 1;
    cfg.epochs = 200;
    cfg.seed = 3;
    auto res = train(cfg, one, one);
    REQUIRE(!res.report.aborted);
    REQUIRE(res.report.train_loss.size() == 200);
    REQUIRE(res.report.val_loss.size() == 200);

    GazeModel fresh(cfg.model, cfg.seed);
    const double initial = evaluate_nll(fresh, one, 1);
    const double best = res.report.val_loss[res.report.best_epoch - 1];
    CAPTURE(initial);
    CAPTURE(best);
    CHECK(initial - best > 1.0);
    // Returned model carries the best-epoch parameters.
    CHECK(evaluate_nll(res.model, one, 1) == best);
}

TEST_CASE("zero epochs yields an untrained model and empty curves") {
    auto samples = toy_samples(8, 4, 1, 12);
    std::vector<WindowSample> one = {samples[0]};
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.epochs = 0;
    cfg.seed = 2;
    auto res = train(cfg, one, one);
    CHECK(!res.report.aborted);
    CHECK(res.report.train_loss.empty());
    CHECK(res.report.val_loss.empty());
    CHECK(res.report.best_epoch == -1);
    auto p = res.model.predict(one[0].graph);
    double sum = 0;
    for (const auto& c : p.comps) sum += c.pi;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a corrupted target aborts before any step is taken") {
    auto samples = toy_samples(10, 4, 1, 77);
    WindowSample bad = samples[0];
    bad.target = {std::nan(""), 0.5};

    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.batch_size = 1;
    cfg.epochs = 5;
    cfg.seed = 8;
    auto res = train(cfg, {bad}, {bad});
    CHECK(res.report.aborted);
    CHECK(res.report.abort_reason.find("epoch 1") != std::string::npos);
    CHECK(res.report.train_loss.empty());
    CHECK(res.report.val_loss.empty());

    // Model state rolled back to initialization: predictions match a fresh
    // model exactly.
    GazeModel fresh(cfg.model, cfg.seed);
    auto pa = res.model.predict(samples[1].graph);
    auto pb = fresh.predict(samples[1].graph);
    REQUIRE(pa.comps.size() == pb.comps.size());
    for (size_t i = 0; i < pa.comps.size(); ++i) {
        CHECK(pa.comps[i].pi == pb.comps[i].pi);
        CHECK(pa.comps[i].mux == pb.comps[i].mux);
        CHECK(pa.comps[i].muy == pb.comps[i].muy);
        CHECK(pa.comps[i].sx == pb.comps[i].sx);
        CHECK(pa.comps[i].sy == pb.comps[i].sy);
        CHECK(pa.comps[i].rho == pb.comps[i].rho);
    }
}

TEST_CASE("train rejects an empty training set") {
    TrainConfig cfg;
    cfg.model = tiny_model();
    CHECK_THROWS_AS(train(cfg, {}, {}), DataError);
}

TEST_CASE("train report serializes config and curves") {
    auto samples = toy_samples(10, 4, 2, 13);
    std::vector<WindowSample> tr(samples.begin(), samples.begin() + 2);
    std::vector<WindowSample> va(samples.begin() + 2, samples.begin() + 3);
    TrainConfig cfg;
    cfg.model = tiny_model();
    cfg.batch_size = 2;
    cfg.epochs = 2;
    cfg.seed = 55;
    auto res = train(cfg, tr, va);
    auto j = nlohmann::json::parse(train_report_json(cfg, res.report));
    CHECK(j["seed"] == 55);
    CHECK(j["epochs"] == 2);
    CHECK(j["batch_size"] == 2);
    CHECK(j["model"]["d"] == 8);
    CHECK(j["train_loss"].size() == 2);
    CHECK(j["val_loss"].size() == 2);
    CHECK(j["best_epoch"] == res.report.best_epoch);
    CHECK(j["aborted"] == false);
}
