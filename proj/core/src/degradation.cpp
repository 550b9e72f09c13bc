#include "mgdun/degradation.hpp"

#include <algorithm>
#include <cmath>

#include "mgdun/rng.hpp"

namespace mgdun {

namespace {

// symmetric reflection for one-pixel padding: -1 -> 0, n -> n-1
inline int reflect(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
}

inline float clip01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

Tensor gaussian_kernel3(float sigma) {
    require(sigma > 0.0f, "gaussian_kernel3: sigma must be > 0");
    Tensor k({1, 1, 3, 3});
    double sum = 0.0;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * double(sigma) * sigma));
            k.at(0, 0, dy + 1, dx + 1) = float(v);
            sum += v;
        }
    for (auto& v : k.values()) v = float(double(v) / sum);
    return k;
}

DegradationOp DegradationOp::make(float sigma, int scale, float noise_std1) {
    require(scale == 2 || scale == 4, "DegradationOp: scale must be 2 or 4");
    require(noise_std1 >= 0.0f, "DegradationOp: noise_std1 must be >= 0");
    return DegradationOp{gaussian_kernel3(sigma), scale, noise_std1};
}

LinearCrossModalOp LinearCrossModalOp::identity(float gain, float noise_std2) {
    Tensor k({1, 1, 1, 1});
    k[0] = 1.0f;
    return LinearCrossModalOp{std::move(k), gain, noise_std2};
}

LinearCrossModalOp LinearCrossModalOp::gauss3(float sigma, float gain, float noise_std2) {
    return LinearCrossModalOp{gaussian_kernel3(sigma), gain, noise_std2};
}

Tensor apply_dk(const Tensor& z, const DegradationOp& op) {
    const Shape& s = z.shape();
    const int sc = op.scale;
    require(s.h % sc == 0 && s.w % sc == 0,
            "apply_dk: HR dims " + s.str() + " not divisible by scale " + std::to_string(sc));
    Tensor out({s.n, s.c, s.h / sc, s.w / sc});
    const Tensor& k = op.blur_kernel;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < s.h / sc; ++oy)
                for (int ox = 0; ox < s.w / sc; ++ox) {
                    const int hy = oy * sc, hx = ox * sc;
                    float acc = 0.0f;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            acc += k.at(0, 0, dy + 1, dx + 1) *
                                   z.at(n, c, reflect(hy + dy, s.h), reflect(hx + dx, s.w));
                    out.at(n, c, oy, ox) = acc;
                }
    return out;
}

Tensor apply_dk_adjoint(const Tensor& x, const DegradationOp& op) {
    const Shape& s = x.shape();
    const int sc = op.scale;
    Tensor out({s.n, s.c, s.h * sc, s.w * sc});
    const int H = s.h * sc, W = s.w * sc;
    const Tensor& k = op.blur_kernel;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < s.h; ++oy)
                for (int ox = 0; ox < s.w; ++ox) {
                    const int hy = oy * sc, hx = ox * sc;
                    const float v = x.at(n, c, oy, ox);
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            out.at(n, c, reflect(hy + dy, H), reflect(hx + dx, W)) +=
                                k.at(0, 0, dy + 1, dx + 1) * v;
                }
    return out;
}

Tensor apply_p(const Tensor& z, const LinearCrossModalOp& op) {
    const Shape& s = z.shape();
    const Shape& ks = op.kernel.shape();
    require(ks.h % 2 == 1 && ks.w % 2 == 1, "apply_p: kernel dims must be odd");
    const int ry = ks.h / 2, rx = ks.w / 2;
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < s.h; ++oy)
                for (int ox = 0; ox < s.w; ++ox) {
                    float acc = 0.0f;
                    for (int dy = -ry; dy <= ry; ++dy)
                        for (int dx = -rx; dx <= rx; ++dx)
                            acc += op.kernel.at(0, 0, dy + ry, dx + rx) *
                                   z.at(n, c, reflect(oy + dy, s.h), reflect(ox + dx, s.w));
                    out.at(n, c, oy, ox) = op.gain * acc;
                }
    return out;
}

Tensor apply_p_adjoint(const Tensor& y, const LinearCrossModalOp& op) {
    const Shape& s = y.shape();
    const Shape& ks = op.kernel.shape();
    const int ry = ks.h / 2, rx = ks.w / 2;
    Tensor out(s);
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy < s.h; ++oy)
                for (int ox = 0; ox < s.w; ++ox) {
                    const float v = op.gain * y.at(n, c, oy, ox);
                    for (int dy = -ry; dy <= ry; ++dy)
                        for (int dx = -rx; dx <= rx; ++dx)
                            out.at(n, c, reflect(oy + dy, s.h), reflect(ox + dx, s.w)) +=
                                op.kernel.at(0, 0, dy + ry, dx + rx) * v;
                }
    return out;
}

// --- bicubic -----------------------------------------------------------------

namespace {

// Catmull-Rom weights (a = -0.5) for taps at floor(u)-1 .. floor(u)+2.
void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

// Resample the last axis from `in_len` to `out_len`; rows indexed [0, rows).
void resample_axis(const float* in, float* out, std::int64_t rows, int in_len,
                   int out_len, double f_in_per_out) {
    std::vector<int> base(static_cast<std::size_t>(out_len));
    std::vector<double> wts(static_cast<std::size_t>(out_len) * 4);
    for (int o = 0; o < out_len; ++o) {
        const double u = (o + 0.5) * f_in_per_out - 0.5;
        const int b = int(std::floor(u));
        catmull_rom_weights(u - b, &wts[std::size_t(o) * 4]);
        base[std::size_t(o)] = b;
    }
    for (std::int64_t r = 0; r < rows; ++r) {
        const float* irow = in + r * in_len;
        float* orow = out + r * out_len;
        for (int o = 0; o < out_len; ++o) {
            const double* w = &wts[std::size_t(o) * 4];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) {
                const int idx = std::clamp(base[std::size_t(o)] - 1 + k, 0, in_len - 1);
                acc += w[k] * irow[idx];
            }
            orow[o] = float(acc);
        }
    }
}

}  // namespace

Tensor bicubic_resize(const Tensor& x, int factor, bool upscale) {
    require(factor == 2 || factor == 4, "bicubic_resize: factor must be 2 or 4");
    const Shape& s = x.shape();
    int oh, ow;
    double f;  // input units per output unit
    if (upscale) {
        oh = s.h * factor;
        ow = s.w * factor;
        f = 1.0 / factor;
    } else {
        require(s.h % factor == 0 && s.w % factor == 0,
                "bicubic_resize: dims " + s.str() + " not divisible by factor");
        oh = s.h / factor;
        ow = s.w / factor;
        f = double(factor);
    }
    // rows pass: (n*c*h, w) -> (n*c*h, ow)
    Tensor tmp({s.n, s.c, s.h, ow});
    resample_axis(x.data(), tmp.data(), std::int64_t(s.n) * s.c * s.h, s.w, ow, f);
    // columns pass: transpose-free via strided gather
    Tensor out({s.n, s.c, oh, ow});
    std::vector<int> base(static_cast<std::size_t>(oh));
    std::vector<double> wts(static_cast<std::size_t>(oh) * 4);
    for (int o = 0; o < oh; ++o) {
        const double u = (o + 0.5) * f - 0.5;
        const int b = int(std::floor(u));
        catmull_rom_weights(u - b, &wts[std::size_t(o) * 4]);
        base[std::size_t(o)] = b;
    }
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int o = 0; o < oh; ++o) {
                const double* w = &wts[std::size_t(o) * 4];
                float* orow = &out.at(n, c, o, 0);
                const float* rows[4];
                for (int k = 0; k < 4; ++k) {
                    const int idx = std::clamp(base[std::size_t(o)] - 1 + k, 0, s.h - 1);
                    rows[k] = &tmp.at(n, c, idx, 0);
                }
                for (int xw = 0; xw < ow; ++xw)
                    orow[xw] = float(w[0] * rows[0][xw] + w[1] * rows[1][xw] +
                                     w[2] * rows[2][xw] + w[3] * rows[3][xw]);
            }
    return out;
}

// --- phantoms ----------------------------------------------------------------

PhantomPair make_phantom(const PhantomSpec& spec) {
    require(spec.height > 0 && spec.width > 0, "make_phantom: bad size");
    require(spec.ellipses >= 0, "make_phantom: bad ellipse count");
    Rng rng(spec.seed);
    const int H = spec.height, W = spec.width;

    // tissue base value per pixel; background is 0
    std::vector<float> base(std::size_t(H) * W, 0.0f);
    for (int e = 0; e < spec.ellipses; ++e) {
        const double cy = rng.uniform(0.18, 0.82) * H;
        const double cx = rng.uniform(0.18, 0.82) * W;
        const double ay = rng.uniform(0.08, 0.30) * H;
        const double ax = rng.uniform(0.08, 0.30) * W;
        const double th = rng.uniform(0.0, M_PI);
        const float v = float(rng.uniform(0.15, 1.0));
        const double ct = std::cos(th), st = std::sin(th);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
                const double ry = (ct * dy - st * dx) / ay;
                const double rx = (st * dy + ct * dx) / ax;
                if (ry * ry + rx * rx <= 1.0)
                    base[std::size_t(y) * W + x] = v;
            }
    }

    PhantomPair pair{Tensor({1, 1, H, W}), Tensor({1, 1, H, W})};
    for (std::int64_t i = 0; i < std::int64_t(H) * W; ++i) {
        const float v = base[std::size_t(i)];
        pair.target[i] = clip01(spec.target_scale * v + spec.target_offset);
        pair.guide[i] = clip01(spec.guide_scale * v + spec.guide_offset);
    }
    return pair;
}

ReconProblem synth_problem(const PhantomSpec& spec, const DegradationOp& op,
                           const LinearCrossModalOp& cross) {
    PhantomPair ph = make_phantom(spec);
    ReconProblem pr;
    pr.scale = op.scale;
    pr.z = ph.target;
    pr.x = apply_dk(pr.z, op);
    pr.y = apply_p(pr.z, cross);
    Rng noise(spec.seed ^ 0x9e3779b97f4a7c15ull);
    if (op.noise_std1 > 0.0f)
        for (auto& v : pr.x.values()) v += float(op.noise_std1 * noise.normal());
    if (cross.noise_std2 > 0.0f)
        for (auto& v : pr.y.values()) v += float(cross.noise_std2 * noise.normal());
    for (auto& v : pr.x.values()) v = clip01(v);
    for (auto& v : pr.y.values()) v = clip01(v);
    return pr;
}

}  // namespace mgdun
