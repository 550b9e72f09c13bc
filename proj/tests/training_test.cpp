#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mgdun/metrics.hpp"
#include "mgdun/rng.hpp"
#include "mgdun/training.hpp"
#include "oracles.hpp"

using namespace mgdun;

namespace {

std::vector<ReconProblem> phantom_set(int count, int size, int scale,
                                      std::uint64_t seed, float noise1 = 0.0f) {
    std::vector<ReconProblem> out;
    DegradationOp dk = DegradationOp::make(1.0f, scale, noise1);
    LinearCrossModalOp p = LinearCrossModalOp::identity(0.7f);
    for (int i = 0; i < count; ++i) {
        PhantomSpec spec;
        spec.seed = seed + std::uint64_t(i);
        spec.height = spec.width = size;
        out.push_back(synth_problem(spec, dk, p));
    }
    return out;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

bool same_file_bytes(const std::string& a, const std::string& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), {});
    std::string sb((std::istreambuf_iterator<char>(fb)), {});
    return !sa.empty() && sa == sb;
}

}  // namespace

TEST_CASE("l1_loss values and gradient") {
    Rng rng(501);
    Tensor x = oracles::random_tensor({1, 1, 8, 8}, rng);
    CHECK(l1_loss(x, x) == 0.0f);

    Tensor zeros({1, 2, 4, 4}, 0.0f);
    Tensor ones({1, 2, 4, 4}, 1.0f);
    CHECK(l1_loss(zeros, ones) == doctest::Approx(1.0));

    // gradient w.r.t. pred is sign(pred - gt) / count, via finite differences
    Tensor gt = oracles::random_tensor({1, 1, 4, 4}, rng);
    Tensor pred = add(gt, oracles::random_tensor({1, 1, 4, 4}, rng, 0.1f, 0.5f));
    Tape t;
    Var pv = t.leaf(pred, true);
    Var loss = l1_loss(t, pv, t.leaf(gt));
    t.backward(loss);
    auto f = [&](const Tensor& p) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < p.numel(); ++i)
            acc += std::fabs(double(p[i]) - double(gt[i]));
        return acc / double(p.numel());
    };
    for (std::int64_t i = 0; i < pred.numel(); i += 3) {
        const double fd = oracles::fd_partial(f, pred, i, 1e-4);
        CHECK(double(t.grad(pv)[i]) == doctest::Approx(fd).epsilon(1e-3));
    }
    CHECK_THROWS_AS(l1_loss(zeros, Tensor({1, 1, 4, 4})), std::invalid_argument);
}

TEST_CASE("adam: zero gradient from a fresh state moves nothing, moments decay") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 1;
    cfg.unet_width = 4;
    MgdunModel m = MgdunModel::init(cfg, 77);
    const Tensor before = m.param(0);
    AdamState st = AdamState::init(m);
    TrainConfig tc;
    tc.lr = 0.1f;

    std::vector<Tensor> grads;
    for (int p = 0; p < m.param_count(); ++p)
        grads.push_back(Tensor(m.param(p).shape()));  // explicit zeros
    adam_step(m, grads, st, tc);
    CHECK(oracles::max_abs_diff(m.param(0), before) == 0.0);
    CHECK(st.step == 1);

    // a stale first moment decays by beta1 under a zero gradient
    st.m[0] = Tensor(st.m[0].shape(), 0.5f);
    adam_step(m, grads, st, tc);
    CHECK(st.m[0][0] == doctest::Approx(0.45));  // 0.9 * 0.5
}

TEST_CASE("adam: first unit-gradient step moves by about -lr") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 1;
    cfg.unet_width = 4;
    MgdunModel m = MgdunModel::init(cfg, 78);
    AdamState st = AdamState::init(m);
    TrainConfig tc;
    tc.lr = 0.01f;
    const Tensor before = m.param(0);

    std::vector<Tensor> grads;
    for (int p = 0; p < m.param_count(); ++p)
        grads.push_back(Tensor(m.param(p).shape(), 1.0f));
    adam_step(m, grads, st, tc);
    // bias correction makes mhat/sqrt(vhat) = 1 at step 1, so delta = -lr/(1+eps)
    for (std::int64_t i = 0; i < 5; ++i)
        CHECK(m.param(0)[i] == doctest::Approx(before[i] - 0.01).epsilon(1e-5));
}

TEST_CASE("adam: deterministic and aborts on NaN gradients") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 1;
    cfg.unet_width = 4;
    MgdunModel a = MgdunModel::init(cfg, 79);
    MgdunModel b = MgdunModel::init(cfg, 79);
    AdamState sa = AdamState::init(a), sb = AdamState::init(b);
    TrainConfig tc;
    tc.lr = 0.05f;
    Rng rng(502);
    std::vector<Tensor> grads;
    for (int p = 0; p < a.param_count(); ++p)
        grads.push_back(oracles::random_tensor(a.param(p).shape(), rng));
    adam_step(a, grads, sa, tc);
    adam_step(b, grads, sb, tc);
    for (int p = 0; p < a.param_count(); ++p)
        CHECK(oracles::max_abs_diff(a.param(p), b.param(p)) == 0.0);

    grads[0][0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(a, grads, sa, tc), std::runtime_error);
}

TEST_CASE("adam drives w^2 toward zero") {
    // scalar sanity harness independent of the network
    float w = 1.0f;
    float m = 0.0f, v = 0.0f;
    const float lr = 1e-2f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
    int steps = 0;
    for (; steps < 2000 && std::fabs(w) >= 0.5f; ++steps) {
        const float g = 2.0f * w;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const float mhat = m / (1 - std::pow(b1, float(steps + 1)));
        const float vhat = v / (1 - std::pow(b2, float(steps + 1)));
        w -= lr * mhat / (std::sqrt(vhat) + eps);
    }
    CHECK(std::fabs(w) < 0.5f);
    CHECK(steps < 2000);
}

TEST_CASE("train: lr = 0 leaves weights bit-identical") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 2;
    cfg.unet_width = 8;
    cfg.inn_hidden = 4;
    MgdunModel m = MgdunModel::init(cfg, 80);
    const MgdunModel orig = m;
    TrainConfig tc;
    tc.lr = 0.0f;
    tc.batch_size = 2;
    tc.max_iters = 4;
    tc.seed = 5;
    auto set = phantom_set(4, 32, 2, 600);
    TrainResult r = train(tc, std::move(m), set, {});
    for (int p = 0; p < orig.param_count(); ++p)
        CHECK(oracles::max_abs_diff(r.final_model.param(p), orig.param(p)) == 0.0);
}

TEST_CASE("train: fixed seed reproduces the loss trace bit-for-bit") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 2;
    cfg.unet_width = 8;
    cfg.inn_hidden = 4;
    TrainConfig tc;
    tc.lr = 1e-3f;
    tc.batch_size = 2;
    tc.max_iters = 6;
    tc.seed = 9;
    auto set = phantom_set(4, 32, 2, 601);

    TrainResult r1 = train(tc, MgdunModel::init(cfg, 81), set, {});
    TrainResult r2 = train(tc, MgdunModel::init(cfg, 81), set, {});
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i)
        CHECK(r1.trace[i].loss == r2.trace[i].loss);
    for (int p = 0; p < r1.final_model.param_count(); ++p)
        CHECK(oracles::max_abs_diff(r1.final_model.param(p),
                                    r2.final_model.param(p)) == 0.0);
}

TEST_CASE("train: short run decreases the loss") {
    ModelConfig cfg;
    cfg.stages = 1;
    cfg.unet_depth = 2;
    cfg.unet_width = 8;
    cfg.inn_hidden = 4;
    TrainConfig tc;
    tc.lr = 1e-3f;
    tc.batch_size = 4;
    tc.max_iters = 40;
    tc.seed = 11;
    tc.val_every = 20;
    auto set = phantom_set(8, 32, 2, 602);
    auto val = phantom_set(1, 32, 2, 699);
    TrainResult r = train(tc, MgdunModel::init(cfg, 82), set, val);
    REQUIRE(r.iters_run == 40);
    CHECK(!r.diverged);
    // average of the last 5 iterations beats the first
    double head = r.trace.front().loss, tail = 0.0;
    for (int i = 0; i < 5; ++i) tail += r.trace[r.trace.size() - 1 - i].loss;
    tail /= 5.0;
    CAPTURE(head);
    CAPTURE(tail);
    CHECK(tail < head);
    CHECK(r.best_val_psnr > 0.0);
}

TEST_CASE("checkpoint round trip is byte-identical and behaviour-preserving") {
    ModelConfig cfg;
    cfg.stages = 2;
    cfg.unet_depth = 2;
    cfg.unet_width = 8;
    cfg.inn_hidden = 4;
    MgdunModel m = MgdunModel::init(cfg, 83);
    AdamState st = AdamState::init(m);
    st.step = 17;
    Rng rng(503);
    for (auto& t : st.m) rng.fill_uniform(t, -0.1f, 0.1f);
    for (auto& t : st.v) rng.fill_uniform(t, 0.0f, 0.01f);

    const std::string p1 = temp_path("mgdun_ckpt_a.bin");
    const std::string p2 = temp_path("mgdun_ckpt_b.bin");
    checkpoint_save(m, p1, &st);
    AdamState st2;
    MgdunModel m2 = checkpoint_load(p1, &st2);
    checkpoint_save(m2, p2, &st2);
    CHECK(same_file_bytes(p1, p2));
    CHECK(st2.step == 17);

    // forward outputs agree exactly after the round trip
    auto set = phantom_set(1, 32, 2, 604);
    Tensor o1 = mgdun_forward(m, set[0].x, set[0].y);
    Tensor o2 = mgdun_forward(m2, set[0].x, set[0].y);
    CHECK(oracles::max_abs_diff(o1, o2) == 0.0);

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint rejects a wrong magic") {
    const std::string p = temp_path("mgdun_ckpt_bad.bin");
    std::ofstream f(p, std::ios::binary);
    f << "NOTACKPT 9\nstuff\n";
    f.close();
    CHECK_THROWS_AS(checkpoint_load(p), std::runtime_error);
    std::remove(p.c_str());
}

TEST_CASE("train with freeze_eta keeps eta at zero") {
    ModelConfig cfg;
    cfg.stages = 2;
    cfg.unet_depth = 2;
    cfg.unet_width = 8;
    cfg.inn_hidden = 4;
    TrainConfig tc;
    tc.lr = 1e-3f;
    tc.batch_size = 2;
    tc.max_iters = 6;
    tc.freeze_eta = true;
    auto set = phantom_set(4, 32, 2, 605);
    TrainResult r = train(tc, MgdunModel::init(cfg, 84), set, {});
    for (const auto& st : r.final_model.stage_ids())
        CHECK(r.final_model.param(st.eta)[0] == 0.0f);
}
