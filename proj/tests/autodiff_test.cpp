#include <doctest.h>

#include <functional>
#include <stdexcept>

#include "mgdun/autodiff.hpp"
#include "mgdun/rng.hpp"
#include "oracles.hpp"

using namespace mgdun;

namespace {

// Scalarize an op's output as mean((out .* w + K)) with positive entries, so
// the tape loss is smooth and the oracle can evaluate the same functional in
// 64-bit from the op's raw output. The +K offset cancels in central
// differences.
struct GradProbe {
    Shape in_shape;
    std::function<Tensor(const Tensor&)> op_tensor;     // plain forward
    std::function<Var(Tape&, Var)> op_graph;            // graph forward
};

void check_grad(const GradProbe& probe, Rng& rng, int samples = 8,
                double tol = 1e-3, float lo = -1.0f, float hi = 1.0f) {
    Tensor x = oracles::random_tensor(probe.in_shape, rng, lo, hi);
    const Tensor out0 = probe.op_tensor(x);
    Tensor wts = oracles::random_tensor(out0.shape(), rng, 0.5f, 1.5f);
    const float offset = 100.0f;

    // 64-bit oracle functional
    auto s_of = [&](const Tensor& xt) {
        const Tensor out = probe.op_tensor(xt);
        double acc = 0.0;
        for (std::int64_t i = 0; i < out.numel(); ++i)
            acc += (double(out[i]) * wts[i] + offset);
        return acc / double(out.numel());
    };

    // autodiff gradient
    Tape t;
    Var xv = t.leaf(x, true);
    Var out = probe.op_graph(t, xv);
    Var loss = t.mean_abs(
        t.add(t.hadamard(out, t.leaf(wts)), t.leaf(Tensor(out0.shape(), offset))));
    t.backward(loss);
    const Tensor& g = t.grad(xv);
    REQUIRE(!g.empty());
    REQUIRE(g.shape() == x.shape());

    for (int s = 0; s < samples; ++s) {
        const std::int64_t i = std::int64_t(rng.next_u64() % std::uint64_t(x.numel()));
        const double fd = oracles::fd_partial(s_of, x, i, 1e-3);
        const double ad = double(g[i]);
        CAPTURE(i);
        CAPTURE(fd);
        CAPTURE(ad);
        CHECK(std::fabs(ad - fd) / std::max({std::fabs(ad), std::fabs(fd), 1e-3}) < tol);
    }
}

}  // namespace

TEST_CASE("mean_abs subgradient sign over count") {
    Tape t;
    Var x = t.leaf(Tensor::from({1, 1, 1, 2}, {3.0f, -2.0f}), true);
    Var loss = t.mean_abs(x);
    t.backward(loss);
    const Tensor& g = t.grad(x);
    CHECK(g[0] == doctest::Approx(0.5));
    CHECK(g[1] == doctest::Approx(-0.5));
}

TEST_CASE("relu gradient is 1 above zero and 0 below") {
    for (float xv : {2.5f, -1.5f}) {
        Tape t;
        Var x = t.leaf(Tensor::from({1, 1, 1, 1}, {xv}), true);
        Var loss = t.mean_abs(t.relu(x));
        t.backward(loss);
        CHECK(t.grad(x)[0] == (xv > 0 ? 1.0f : 0.0f));
    }
}

TEST_CASE("conv2d input gradient vs finite differences") {
    Rng rng(101);
    Tensor w = oracles::random_tensor({3, 4, 3, 3}, rng);
    Tensor b = oracles::random_tensor({1, 3, 1, 1}, rng);
    GradProbe p;
    p.in_shape = {2, 4, 8, 8};
    p.op_tensor = [&](const Tensor& x) { return conv2d(x, w, b, 1, 1); };
    p.op_graph = [&](Tape& t, Var x) {
        return t.conv2d(x, t.leaf(w), t.leaf(b), 1, 1);
    };
    check_grad(p, rng);
}

TEST_CASE("conv2d weight gradient vs finite differences") {
    Rng rng(102);
    Tensor x = oracles::random_tensor({2, 3, 6, 6}, rng);
    const Shape ws{2, 3, 3, 3};
    Tensor w0 = oracles::random_tensor(ws, rng);
    const Tensor out0 = conv2d(x, w0, Tensor(), 1, 1);
    Tensor wts = oracles::random_tensor(out0.shape(), rng, 0.5f, 1.5f);

    auto s_of = [&](const Tensor& w) {
        const Tensor out = conv2d(x, w, Tensor(), 1, 1);
        double acc = 0.0;
        for (std::int64_t i = 0; i < out.numel(); ++i)
            acc += double(out[i]) * wts[i] + 100.0;
        return acc / double(out.numel());
    };

    Tape t;
    Var wv = t.leaf(w0, true);
    Var out = t.conv2d(t.leaf(x), wv, Var{}, 1, 1);
    Var loss = t.mean_abs(
        t.add(t.hadamard(out, t.leaf(wts)), t.leaf(Tensor(out0.shape(), 100.0f))));
    t.backward(loss);
    const Tensor& g = t.grad(wv);
    for (int s = 0; s < 10; ++s) {
        const std::int64_t i = std::int64_t(rng.next_u64() % std::uint64_t(w0.numel()));
        const double fd = oracles::fd_partial(s_of, w0, i, 1e-3);
        CHECK(std::fabs(double(g[i]) - fd) /
                  std::max({std::fabs(double(g[i])), std::fabs(fd), 1e-3}) <
              1e-3);
    }
}

TEST_CASE("conv2d bias gradient sums upstream") {
    Rng rng(103);
    Tensor x = oracles::random_tensor({2, 1, 4, 4}, rng);
    Tensor w = oracles::random_tensor({2, 1, 3, 3}, rng);
    Tape t;
    Var bv = t.leaf(Tensor({1, 2, 1, 1}), true);
    Var out = t.conv2d(t.leaf(x), t.leaf(w), bv, 1, 1);
    Var loss = t.mean_abs(t.add(out, t.leaf(Tensor(t.val(out).shape(), 100.0f))));
    t.backward(loss);
    // each bias element feeds n*h*w outputs, all positive after the offset
    const double want = 2.0 * 4 * 4 / double(2 * 2 * 4 * 4);
    CHECK(t.grad(bv)[0] == doctest::Approx(want).epsilon(1e-5));
    CHECK(t.grad(bv)[1] == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("per-op gradients vs finite differences") {
    Rng rng(104);

    SUBCASE("relu away from the kink") {
        GradProbe p;
        p.in_shape = {2, 4, 8, 8};
        p.op_tensor = [](const Tensor& x) { return relu(x); };
        p.op_graph = [](Tape& t, Var x) { return t.relu(x); };
        // inputs in [0.2, 1] then mirrored keeps |x| >= 0.2
        check_grad(p, rng, 8, 1e-3, 0.2f, 1.0f);
        check_grad(p, rng, 8, 1e-3, -1.0f, -0.2f);
    }
    SUBCASE("maxpool2") {
        GradProbe p;
        p.in_shape = {1, 4, 8, 8};
        p.op_tensor = [](const Tensor& x) { return maxpool2(x); };
        p.op_graph = [](Tape& t, Var x) { return t.maxpool2(x); };
        check_grad(p, rng);
    }
    SUBCASE("upsample_nearest2") {
        GradProbe p;
        p.in_shape = {1, 4, 6, 6};
        p.op_tensor = [](const Tensor& x) { return upsample_nearest2(x); };
        p.op_graph = [](Tape& t, Var x) { return t.upsample_nearest2(x); };
        check_grad(p, rng);
    }
    SUBCASE("pixel shuffle pair") {
        GradProbe p;
        p.in_shape = {1, 4, 6, 6};
        p.op_tensor = [](const Tensor& x) { return pixel_shuffle2(pixel_unshuffle2(x)); };
        p.op_graph = [](Tape& t, Var x) { return t.pixel_shuffle2(t.pixel_unshuffle2(x)); };
        check_grad(p, rng);
    }
    SUBCASE("exp of clamped input") {
        GradProbe p;
        p.in_shape = {2, 2, 4, 4};
        p.op_tensor = [](const Tensor& x) { return exp_elem(clamp_elem(x, -2.0f, 2.0f)); };
        p.op_graph = [](Tape& t, Var x) { return t.exp_elem(t.clamp_elem(x, -2.0f, 2.0f)); };
        // stay inside the clamp so the kink does not meet the probe
        check_grad(p, rng, 8, 1e-3, -1.5f, 1.5f);
    }
    SUBCASE("hadamard with a constant") {
        Rng crng(105);
        Tensor c = oracles::random_tensor({2, 2, 4, 4}, crng);
        GradProbe p;
        p.in_shape = {2, 2, 4, 4};
        p.op_tensor = [&](const Tensor& x) { return hadamard(x, c); };
        p.op_graph = [&](Tape& t, Var x) { return t.hadamard(x, t.leaf(c)); };
        check_grad(p, rng);
    }
    SUBCASE("slice then concat reversed") {
        GradProbe p;
        p.in_shape = {1, 6, 4, 4};
        p.op_tensor = [](const Tensor& x) {
            return concat_c(slice_c(x, 3, 6), slice_c(x, 0, 3));
        };
        p.op_graph = [](Tape& t, Var x) {
            return t.concat_c(t.slice_c(x, 3, 6), t.slice_c(x, 0, 3));
        };
        check_grad(p, rng);
    }
    SUBCASE("sub and scalar_mul chain") {
        Rng crng(106);
        Tensor c = oracles::random_tensor({2, 2, 4, 4}, crng);
        GradProbe p;
        p.in_shape = {2, 2, 4, 4};
        p.op_tensor = [&](const Tensor& x) { return scalar_mul(sub(x, c), -1.7f); };
        p.op_graph = [&](Tape& t, Var x) { return t.scalar_mul(t.sub(x, t.leaf(c)), -1.7f); };
        check_grad(p, rng);
    }
}

TEST_CASE("scale_by gradient w.r.t. the learnable scalar") {
    Rng rng(107);
    Tensor x = oracles::random_tensor({1, 2, 4, 4}, rng);
    Tensor s0 = Tensor::from({1, 1, 1, 1}, {0.37f});

    auto s_of = [&](const Tensor& s) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < x.numel(); ++i)
            acc += double(s[0]) * x[i] + 100.0;
        return acc / double(x.numel());
    };

    Tape t;
    Var sv = t.leaf(s0, true);
    Var out = t.scale_by(t.leaf(x), sv);
    Var loss = t.mean_abs(t.add(out, t.leaf(Tensor(x.shape(), 100.0f))));
    t.backward(loss);
    const double fd = oracles::fd_partial(s_of, s0, 0, 1e-3);
    CHECK(std::fabs(double(t.grad(sv)[0]) - fd) /
              std::max({std::fabs(fd), 1e-3}) < 1e-3);
}

TEST_CASE("composed two-layer graph gradient vs finite differences") {
    Rng rng(108);
    Tensor w1 = oracles::random_tensor({4, 2, 3, 3}, rng);
    Tensor w2 = oracles::random_tensor({2, 4, 3, 3}, rng);
    GradProbe p;
    p.in_shape = {1, 2, 8, 8};
    p.op_tensor = [&](const Tensor& x) {
        return conv2d(relu(conv2d(x, w1, Tensor(), 1, 1)), w2, Tensor(), 1, 1);
    };
    p.op_graph = [&](Tape& t, Var x) {
        return t.conv2d(t.relu(t.conv2d(x, t.leaf(w1), Var{}, 1, 1)), t.leaf(w2),
                        Var{}, 1, 1);
    };
    check_grad(p, rng, 10);
}

TEST_CASE("fan-out accumulates branch gradients") {
    Rng rng(109);
    Tensor c = oracles::random_tensor({1, 2, 4, 4}, rng, 0.5f, 1.5f);
    Tensor x0 = oracles::random_tensor({1, 2, 4, 4}, rng, 0.2f, 1.0f);

    auto s_of = [&](const Tensor& x) {
        // branch 1: mean(x .* c + 100); branch 2: mean(relu(x) + 100)
        double acc1 = 0.0, acc2 = 0.0;
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            acc1 += double(x[i]) * c[i] + 100.0;
            acc2 += double(x[i] > 0 ? x[i] : 0.0f) + 100.0;
        }
        return acc1 / double(x.numel()) + acc2 / double(x.numel());
    };

    Tape t;
    Var xv = t.leaf(x0, true);
    Var b1 = t.mean_abs(t.add(t.hadamard(xv, t.leaf(c)), t.leaf(Tensor(x0.shape(), 100.0f))));
    Var b2 = t.mean_abs(t.add(t.relu(xv), t.leaf(Tensor(x0.shape(), 100.0f))));
    Var loss = t.add(b1, b2);
    t.backward(loss);
    const Tensor& g = t.grad(xv);
    for (int s = 0; s < 8; ++s) {
        const std::int64_t i = std::int64_t(rng.next_u64() % std::uint64_t(x0.numel()));
        const double fd = oracles::fd_partial(s_of, x0, i, 1e-3);
        CHECK(std::fabs(double(g[i]) - fd) /
                  std::max({std::fabs(double(g[i])), std::fabs(fd), 1e-3}) < 1e-3);
    }
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tape t;
    Var x = t.leaf(Tensor({1, 1, 2, 2}), true);
    Var y = t.relu(x);
    CHECK_THROWS_AS(t.backward(y), std::invalid_argument);
}
