#include "mgdun/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace mgdun {

namespace {
const Tensor kEmpty;
}

Var Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{int(nodes_.size()) - 1};
}

const Tensor& Tape::val(Var v) const {
    require(v.valid() && v.i < int(nodes_.size()), "tape: bad var");
    return nodes_[std::size_t(v.i)].val;
}

const Tensor& Tape::grad(Var v) const {
    require(v.valid() && v.i < int(nodes_.size()), "tape: bad var");
    return nodes_[std::size_t(v.i)].grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::leaf;
    n.val = std::move(value);
    n.needs_grad = requires_grad;
    n.is_param = requires_grad;
    return push(std::move(n));
}

#define MGDUN_UNARY_PRE(x)                          \
    Node n;                                         \
    n.in = {x.i, -1, -1};                           \
    n.needs_grad = wants(x.i);

Var Tape::conv2d(Var x, Var w, Var b, int stride, int padding) {
    Node n;
    n.op = Op::conv2d;
    n.in = {x.i, w.i, b.valid() ? b.i : -1};
    n.stride = stride;
    n.padding = padding;
    n.val = mgdun::conv2d(val(x), val(w), b.valid() ? val(b) : kEmpty, stride, padding);
    n.needs_grad = wants(x.i) || wants(w.i) || (b.valid() && wants(b.i));
    return push(std::move(n));
}

Var Tape::relu(Var x) {
    MGDUN_UNARY_PRE(x)
    n.op = Op::relu;
    n.val = mgdun::relu(val(x));
    return push(std::move(n));
}

Var Tape::maxpool2(Var x) {
    MGDUN_UNARY_PRE(x)
    n.op = Op::maxpool2;
    n.val = mgdun::maxpool2(val(x), n.needs_grad ? &n.argmax : nullptr);
    return push(std::move(n));
}

Var Tape::upsample_nearest2(Var x) {
    MGDUN_UNARY_PRE(x)
    n.op = Op::upsample2;
    n.val = mgdun::upsample_nearest2(val(x));
    return push(std::move(n));
}

Var Tape::pixel_unshuffle2(Var x) {
    MGDUN_UNARY_PRE(x)
    n.op = Op::pix_unshuffle;
    n.val = mgdun::pixel_unshuffle2(val(x));
    return push(std::move(n));
}

Var Tape::pixel_shuffle2(Var x) {
    MGDUN_UNARY_PRE(x)
    n.op = Op::pix_shuffle;
    n.val = mgdun::pixel_shuffle2(val(x));
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    Node n;
    n.op = Op::add;
    n.in = {a.i, b.i, -1};
    n.val = mgdun::add(val(a), val(b));
    n.needs_grad = wants(a.i) || wants(b.i);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    Node n;
    n.op = Op::sub;
    n.in = {a.i, b.i, -1};
    n.val = mgdun::sub(val(a), val(b));
    n.needs_grad = wants(a.i) || wants(b.i);
    return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
    Node n;
    n.op = Op::hadamard;
    n.in = {a.i, b.i, -1};
    n.val = mgdun::hadamard(val(a), val(b));
    n.needs_grad = wants(a.i) || wants(b.i);
    return push(std::move(n));
}

Var Tape::scalar_mul(Var a, float s) {
    MGDUN_UNARY_PRE(a)
    n.op = Op::scalar_mul;
    n.a0 = s;
    n.val = mgdun::scalar_mul(val(a), s);
    return push(std::move(n));
}

Var Tape::negate(Var a) { return scalar_mul(a, -1.0f); }

Var Tape::exp_elem(Var a) {
    MGDUN_UNARY_PRE(a)
    n.op = Op::exp;
    n.val = mgdun::exp_elem(val(a));
    return push(std::move(n));
}

Var Tape::clamp_elem(Var a, float lo, float hi) {
    MGDUN_UNARY_PRE(a)
    n.op = Op::clamp;
    n.a0 = lo;
    n.a1 = hi;
    n.val = mgdun::clamp_elem(val(a), lo, hi);
    return push(std::move(n));
}

Var Tape::mean_abs(Var a) {
    MGDUN_UNARY_PRE(a)
    n.op = Op::mean_abs;
    n.val = Tensor({1, 1, 1, 1});
    n.val[0] = mgdun::mean_abs(val(a));
    return push(std::move(n));
}

Var Tape::scale_by(Var a, Var scalar) {
    require(val(scalar).numel() == 1, "scale_by: scalar var must have one element");
    Node n;
    n.op = Op::scale_by;
    n.in = {a.i, scalar.i, -1};
    n.val = mgdun::scalar_mul(val(a), val(scalar)[0]);
    n.needs_grad = wants(a.i) || wants(scalar.i);
    return push(std::move(n));
}

Var Tape::concat_c(Var a, Var b) {
    Node n;
    n.op = Op::concat;
    n.in = {a.i, b.i, -1};
    n.val = mgdun::concat_c(val(a), val(b));
    n.needs_grad = wants(a.i) || wants(b.i);
    return push(std::move(n));
}

Var Tape::slice_c(Var a, int c_begin, int c_end) {
    MGDUN_UNARY_PRE(a)
    n.op = Op::slice;
    n.c0 = c_begin;
    n.c1 = c_end;
    n.val = mgdun::slice_c(val(a), c_begin, c_end);
    return push(std::move(n));
}

#undef MGDUN_UNARY_PRE

void Tape::accum(int idx, Tensor g) {
    if (!wants(idx)) return;
    Node& n = nodes_[std::size_t(idx)];
    if (n.grad.empty()) {
        n.grad = std::move(g);
    } else {
        for (std::int64_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
    }
}

void Tape::accum_scaled(int idx, const Tensor& g, float s) {
    if (!wants(idx)) return;
    Node& n = nodes_[std::size_t(idx)];
    if (n.grad.empty()) n.grad = Tensor(g.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) n.grad[i] += s * g[i];
}

void Tape::backward(Var loss) {
    require(loss.valid() && loss.i < int(nodes_.size()), "backward: bad loss var");
    Node& ln = nodes_[std::size_t(loss.i)];
    require(ln.val.numel() == 1,
            "backward: loss must be scalar, got " + ln.val.shape().str());
    for (auto& n : nodes_) n.grad = Tensor();
    ln.grad = Tensor({1, 1, 1, 1});
    ln.grad[0] = 1.0f;

    for (int i = loss.i; i >= 0; --i) {
        Node& n = nodes_[std::size_t(i)];
        if (!n.needs_grad || n.grad.empty()) continue;
        const Tensor& g = n.grad;
        const int ia = n.in[0], ib = n.in[1], ic = n.in[2];
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::conv2d: {
                const Tensor& x = nodes_[std::size_t(ia)].val;
                const Tensor& w = nodes_[std::size_t(ib)].val;
                if (wants(ia))
                    accum(ia, conv2d_grad_input(g, w, x.shape(), n.stride, n.padding));
                if (wants(ib))
                    accum(ib, conv2d_grad_weight(g, x, w.shape(), n.stride, n.padding));
                if (ic >= 0 && wants(ic)) accum(ic, conv2d_grad_bias(g));
                break;
            }
            case Op::relu: {
                if (wants(ia)) {
                    Tensor gx(g.shape());
                    for (std::int64_t k = 0; k < g.numel(); ++k)
                        gx[k] = n.val[k] > 0.0f ? g[k] : 0.0f;
                    accum(ia, gx);
                }
                break;
            }
            case Op::maxpool2: {
                if (wants(ia)) {
                    Tensor gx(nodes_[std::size_t(ia)].val.shape());
                    for (std::int64_t k = 0; k < g.numel(); ++k)
                        gx[n.argmax[std::size_t(k)]] += g[k];
                    accum(ia, gx);
                }
                break;
            }
            case Op::upsample2: {
                if (wants(ia)) {
                    const Shape& is = nodes_[std::size_t(ia)].val.shape();
                    Tensor gx(is);
                    for (int nn = 0; nn < is.n; ++nn)
                        for (int c = 0; c < is.c; ++c)
                            for (int y = 0; y < is.h; ++y)
                                for (int x = 0; x < is.w; ++x) {
                                    const float* g0 = &g.at(nn, c, 2 * y, 2 * x);
                                    const float* g1 = &g.at(nn, c, 2 * y + 1, 2 * x);
                                    gx.at(nn, c, y, x) = g0[0] + g0[1] + g1[0] + g1[1];
                                }
                    accum(ia, gx);
                }
                break;
            }
            case Op::pix_unshuffle:
                if (wants(ia)) accum(ia, mgdun::pixel_shuffle2(g));
                break;
            case Op::pix_shuffle:
                if (wants(ia)) accum(ia, mgdun::pixel_unshuffle2(g));
                break;
            case Op::add:
                accum(ia, g);
                accum(ib, g);
                break;
            case Op::sub:
                accum(ia, g);
                accum_scaled(ib, g, -1.0f);
                break;
            case Op::hadamard:
                if (wants(ia)) accum(ia, mgdun::hadamard(g, nodes_[std::size_t(ib)].val));
                if (wants(ib)) accum(ib, mgdun::hadamard(g, nodes_[std::size_t(ia)].val));
                break;
            case Op::scalar_mul:
                accum_scaled(ia, g, n.a0);
                break;
            case Op::exp:
                if (wants(ia)) accum(ia, mgdun::hadamard(g, n.val));
                break;
            case Op::clamp: {
                if (wants(ia)) {
                    const Tensor& x = nodes_[std::size_t(ia)].val;
                    Tensor gx(g.shape());
                    for (std::int64_t k = 0; k < g.numel(); ++k)
                        gx[k] = (x[k] >= n.a0 && x[k] <= n.a1) ? g[k] : 0.0f;
                    accum(ia, gx);
                }
                break;
            }
            case Op::mean_abs: {
                if (wants(ia)) {
                    const Tensor& x = nodes_[std::size_t(ia)].val;
                    const float s = g[0] / float(x.numel());
                    Tensor gx(x.shape());
                    for (std::int64_t k = 0; k < x.numel(); ++k)
                        gx[k] = x[k] > 0.0f ? s : (x[k] < 0.0f ? -s : 0.0f);
                    accum(ia, gx);
                }
                break;
            }
            case Op::scale_by: {
                const float s = nodes_[std::size_t(ib)].val[0];
                accum_scaled(ia, g, s);
                if (wants(ib)) {
                    Tensor gs({1, 1, 1, 1});
                    gs[0] = float(mgdun::dot(g, nodes_[std::size_t(ia)].val));
                    accum(ib, gs);
                }
                break;
            }
            case Op::concat: {
                const int ca = nodes_[std::size_t(ia)].val.shape().c;
                const int cc = g.shape().c;
                if (wants(ia)) accum(ia, mgdun::slice_c(g, 0, ca));
                if (wants(ib)) accum(ib, mgdun::slice_c(g, ca, cc));
                break;
            }
            case Op::slice: {
                if (wants(ia)) {
                    const Shape& is = nodes_[std::size_t(ia)].val.shape();
                    Tensor gx(is);
                    const std::int64_t plane = std::int64_t(is.h) * is.w;
                    for (int nn = 0; nn < is.n; ++nn)
                        std::copy_n(&g.at(nn, 0, 0, 0), plane * (n.c1 - n.c0),
                                    &gx.at(nn, n.c0, 0, 0));
                    accum(ia, gx);
                }
                break;
            }
        }
        // Interior buffers are dead once this node is processed: consumers sit
        // later on the tape and inputs earlier. Keeps peak memory bounded.
        if (!n.is_param && i != loss.i) {
            n.grad = Tensor();
            n.val = Tensor();
        }
    }
}

}  // namespace mgdun
