#include "mgdun/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mgdun {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

Tensor::Tensor(Shape s, float fill) : shape_(s) {
    require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0,
            "tensor dims must be non-negative, got " + s.str());
    data_.assign(std::size_t(s.numel()), fill);
}

Tensor Tensor::from(Shape s, std::vector<float> values) {
    require(std::int64_t(values.size()) == s.numel(),
            "value count " + std::to_string(values.size()) +
                " does not match shape " + s.str());
    Tensor t;
    t.shape_ = s;
    t.data_ = std::move(values);
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                        a.shape().str() + " vs " + b.shape().str());
}

}  // namespace

// --- conv2d -----------------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding) {
    const Shape& is = input.shape();
    const Shape& ws = weight.shape();
    require(ws.h % 2 == 1 && ws.w % 2 == 1, "conv2d: kernel dims must be odd, got " + ws.str());
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(padding >= 0, "conv2d: padding must be >= 0");
    require(is.c == ws.c, "conv2d: input channels " + is.str() +
                              " do not match weight " + ws.str());
    if (!bias.empty())
        require(bias.shape() == Shape{1, ws.n, 1, 1},
                "conv2d: bias shape " + bias.shape().str() + " must be (1," +
                    std::to_string(ws.n) + ",1,1)");

    const int oh = (is.h + 2 * padding - ws.h) / stride + 1;
    const int ow = (is.w + 2 * padding - ws.w) / stride + 1;
    require(oh > 0 && ow > 0, "conv2d: output would be empty for input " + is.str() +
                                  " kernel " + ws.str());
    Tensor out({is.n, ws.n, oh, ow});

    for (int n = 0; n < is.n; ++n) {
        for (int oc = 0; oc < ws.n; ++oc) {
            float* outp = &out.at(n, oc, 0, 0);
            const float bv = bias.empty() ? 0.0f : bias[oc];
            std::fill(outp, outp + std::int64_t(oh) * ow, bv);
            for (int ic = 0; ic < is.c; ++ic) {
                const float* inp = &input.at(n, ic, 0, 0);
                for (int kh = 0; kh < ws.h; ++kh) {
                    for (int kw = 0; kw < ws.w; ++kw) {
                        const float wv = weight.at(oc, ic, kh, kw);
                        if (wv == 0.0f) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride - padding + kh;
                            if (iy < 0 || iy >= is.h) continue;
                            // valid ox range so that ix stays in bounds
                            int x0 = 0, x1 = ow;
                            if (stride == 1) {
                                x0 = std::max(0, padding - kw);
                                x1 = std::min(ow, is.w + padding - kw);
                            }
                            const float* irow = inp + std::int64_t(iy) * is.w - padding + kw;
                            float* orow = outp + std::int64_t(oy) * ow;
                            if (stride == 1) {
                                for (int ox = x0; ox < x1; ++ox)
                                    orow[ox] += wv * irow[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride - padding + kw;
                                    if (ix < 0 || ix >= is.w) continue;
                                    orow[ox] += wv * inp[std::int64_t(iy) * is.w + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                         Shape input_shape, int stride, int padding) {
    const Shape& gs = grad_out.shape();
    const Shape& ws = weight.shape();
    Tensor gin(input_shape);
    for (int n = 0; n < gs.n; ++n) {
        for (int oc = 0; oc < ws.n; ++oc) {
            const float* gp = &grad_out.at(n, oc, 0, 0);
            for (int ic = 0; ic < input_shape.c; ++ic) {
                float* ip = &gin.at(n, ic, 0, 0);
                for (int kh = 0; kh < ws.h; ++kh) {
                    for (int kw = 0; kw < ws.w; ++kw) {
                        const float wv = weight.at(oc, ic, kh, kw);
                        if (wv == 0.0f) continue;
                        for (int oy = 0; oy < gs.h; ++oy) {
                            const int iy = oy * stride - padding + kh;
                            if (iy < 0 || iy >= input_shape.h) continue;
                            int x0 = 0, x1 = gs.w;
                            if (stride == 1) {
                                x0 = std::max(0, padding - kw);
                                x1 = std::min(gs.w, input_shape.w + padding - kw);
                            }
                            const float* grow = gp + std::int64_t(oy) * gs.w;
                            float* irow = ip + std::int64_t(iy) * input_shape.w - padding + kw;
                            if (stride == 1) {
                                for (int ox = x0; ox < x1; ++ox)
                                    irow[ox] += wv * grow[ox];
                            } else {
                                for (int ox = 0; ox < gs.w; ++ox) {
                                    const int ix = ox * stride - padding + kw;
                                    if (ix < 0 || ix >= input_shape.w) continue;
                                    ip[std::int64_t(iy) * input_shape.w + ix] += wv * grow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return gin;
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                          Shape weight_shape, int stride, int padding) {
    const Shape& gs = grad_out.shape();
    const Shape& is = input.shape();
    Tensor gw(weight_shape);
    for (int n = 0; n < gs.n; ++n) {
        for (int oc = 0; oc < weight_shape.n; ++oc) {
            const float* gp = &grad_out.at(n, oc, 0, 0);
            for (int ic = 0; ic < weight_shape.c; ++ic) {
                const float* ip = &input.at(n, ic, 0, 0);
                for (int kh = 0; kh < weight_shape.h; ++kh) {
                    for (int kw = 0; kw < weight_shape.w; ++kw) {
                        double acc = gw.at(oc, ic, kh, kw);
                        for (int oy = 0; oy < gs.h; ++oy) {
                            const int iy = oy * stride - padding + kh;
                            if (iy < 0 || iy >= is.h) continue;
                            int x0 = 0, x1 = gs.w;
                            if (stride == 1) {
                                x0 = std::max(0, padding - kw);
                                x1 = std::min(gs.w, is.w + padding - kw);
                                const float* grow = gp + std::int64_t(oy) * gs.w;
                                const float* irow = ip + std::int64_t(iy) * is.w - padding + kw;
                                float facc = 0.0f;
                                for (int ox = x0; ox < x1; ++ox)
                                    facc += grow[ox] * irow[ox];
                                acc += facc;
                            } else {
                                for (int ox = 0; ox < gs.w; ++ox) {
                                    const int ix = ox * stride - padding + kw;
                                    if (ix < 0 || ix >= is.w) continue;
                                    acc += double(gp[std::int64_t(oy) * gs.w + ox]) *
                                           ip[std::int64_t(iy) * is.w + ix];
                                }
                            }
                        }
                        gw.at(oc, ic, kh, kw) = float(acc);
                    }
                }
            }
        }
    }
    return gw;
}

Tensor conv2d_grad_bias(const Tensor& grad_out) {
    const Shape& gs = grad_out.shape();
    Tensor gb({1, gs.c, 1, 1});
    for (int n = 0; n < gs.n; ++n)
        for (int c = 0; c < gs.c; ++c) {
            const float* gp = &grad_out.at(n, c, 0, 0);
            double acc = gb[c];
            for (std::int64_t i = 0; i < std::int64_t(gs.h) * gs.w; ++i) acc += gp[i];
            gb[c] = float(acc);
        }
    return gb;
}

// --- pooling / resampling ----------------------------------------------------

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    const float* in = x.data();
    float* o = out.data();
    for (std::int64_t i = 0; i < x.numel(); ++i) o[i] = in[i] > 0.0f ? in[i] : 0.0f;
    return out;
}

Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>* argmax) {
    const Shape& s = x.shape();
    require(s.h % 2 == 0 && s.w % 2 == 0,
            "maxpool2: spatial dims must be even, got " + s.str());
    Tensor out({s.n, s.c, s.h / 2, s.w / 2});
    if (argmax) argmax->assign(std::size_t(out.numel()), 0);
    std::int64_t oi = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; y += 2)
                for (int xw = 0; xw < s.w; xw += 2) {
                    std::int64_t base =
                        ((std::int64_t(n) * s.c + c) * s.h + y) * s.w + xw;
                    std::int64_t best = base;
                    float bv = x[base];
                    const std::int64_t cand[3] = {base + 1, base + s.w, base + s.w + 1};
                    for (std::int64_t idx : cand)
                        if (x[idx] > bv) { bv = x[idx]; best = idx; }
                    out[oi] = bv;
                    if (argmax) (*argmax)[std::size_t(oi)] = best;
                    ++oi;
                }
    return out;
}

Tensor upsample_nearest2(const Tensor& x) {
    const Shape& s = x.shape();
    Tensor out({s.n, s.c, s.h * 2, s.w * 2});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y) {
                const float* irow = &x.at(n, c, y, 0);
                float* o0 = &out.at(n, c, 2 * y, 0);
                float* o1 = &out.at(n, c, 2 * y + 1, 0);
                for (int xw = 0; xw < s.w; ++xw) {
                    o0[2 * xw] = o0[2 * xw + 1] = irow[xw];
                    o1[2 * xw] = o1[2 * xw + 1] = irow[xw];
                }
            }
    return out;
}

Tensor pixel_unshuffle2(const Tensor& x) {
    const Shape& s = x.shape();
    require(s.h % 2 == 0 && s.w % 2 == 0,
            "pixel_unshuffle2: spatial dims must be even, got " + s.str());
    Tensor out({s.n, s.c * 4, s.h / 2, s.w / 2});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int oc = c * 4 + dy * 2 + dx;
                    for (int y = 0; y < s.h / 2; ++y) {
                        const float* irow = &x.at(n, c, 2 * y + dy, 0);
                        float* orow = &out.at(n, oc, y, 0);
                        for (int xw = 0; xw < s.w / 2; ++xw)
                            orow[xw] = irow[2 * xw + dx];
                    }
                }
    return out;
}

Tensor pixel_shuffle2(const Tensor& x) {
    const Shape& s = x.shape();
    require(s.c % 4 == 0, "pixel_shuffle2: channels must be divisible by 4, got " + s.str());
    Tensor out({s.n, s.c / 4, s.h * 2, s.w * 2});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c / 4; ++c)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int ic = c * 4 + dy * 2 + dx;
                    for (int y = 0; y < s.h; ++y) {
                        const float* irow = &x.at(n, ic, y, 0);
                        float* orow = &out.at(n, c, 2 * y + dy, 0);
                        for (int xw = 0; xw < s.w; ++xw)
                            orow[2 * xw + dx] = irow[xw];
                    }
                }
    return out;
}

// --- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

Tensor scalar_mul(const Tensor& a, float s) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = s * a[i];
    return out;
}

Tensor negate(const Tensor& a) { return scalar_mul(a, -1.0f); }

Tensor exp_elem(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::exp(a[i]);
    return out;
}

Tensor clamp_elem(const Tensor& a, float lo, float hi) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::clamp(a[i], lo, hi);
    return out;
}

float mean_abs(const Tensor& a) {
    require(a.numel() > 0, "mean_abs: empty tensor");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += std::fabs(double(a[i]));
    return float(acc / double(a.numel()));
}

Tensor concat_c(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w,
            "concat_c: shape mismatch " + sa.str() + " vs " + sb.str());
    Tensor out({sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::int64_t plane = std::int64_t(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
        std::copy_n(&a.at(n, 0, 0, 0), plane * sa.c, &out.at(n, 0, 0, 0));
        std::copy_n(&b.at(n, 0, 0, 0), plane * sb.c, &out.at(n, sa.c, 0, 0));
    }
    return out;
}

Tensor slice_c(const Tensor& a, int c_begin, int c_end) {
    const Shape& s = a.shape();
    require(0 <= c_begin && c_begin < c_end && c_end <= s.c,
            "slice_c: bad channel range [" + std::to_string(c_begin) + "," +
                std::to_string(c_end) + ") for " + s.str());
    Tensor out({s.n, c_end - c_begin, s.h, s.w});
    const std::int64_t plane = std::int64_t(s.h) * s.w;
    for (int n = 0; n < s.n; ++n)
        std::copy_n(&a.at(n, c_begin, 0, 0), plane * (c_end - c_begin),
                    &out.at(n, 0, 0, 0));
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += double(a[i]) * double(b[i]);
    return acc;
}

double sum_sq(const Tensor& a) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += double(a[i]) * double(a[i]);
    return acc;
}

}  // namespace mgdun
