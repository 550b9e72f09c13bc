#include "mgdun/unfolding.hpp"

#include <cmath>
#include <cstdio>

#include "mgdun/degradation.hpp"
#include "mgdun/rng.hpp"

namespace mgdun {

namespace {
constexpr float kExpClamp = 10.0f;
constexpr int kSamplerWidth = 64;  // fixed 64-channel first conv in Up/Down
// final conv of each composite starts small so stage outputs stay close to
// their inputs before training
constexpr float kLastConvGain = 0.05f;
}  // namespace

void ModelConfig::validate() const {
    require(channels >= 1, "ModelConfig: channels must be >= 1");
    require(scale == 2 || scale == 4, "ModelConfig: scale must be 2 or 4");
    require(stages >= 0, "ModelConfig: stages must be >= 0");
    require(inn_blocks >= 1, "ModelConfig: inn_blocks must be >= 1");
    require(unet_width >= 1 && unet_depth >= 1 && inn_hidden >= 1,
            "ModelConfig: widths/depth must be >= 1");
}

int MgdunModel::add_param(std::string name, Tensor t) {
    names_.push_back(std::move(name));
    params_.push_back(std::move(t));
    return int(params_.size()) - 1;
}

ConvIds MgdunModel::add_conv(const std::string& name, int out_c, int in_c, int k,
                             float gain, Rng& rng) {
    Tensor w({out_c, in_c, k, k});
    rng.fill_he_uniform(w, in_c * k * k, gain);
    ConvIds ids;
    ids.w = add_param(name + ".w", std::move(w));
    ids.b = add_param(name + ".b", Tensor({1, out_c, 1, 1}));
    return ids;
}

int MgdunModel::find_param(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return int(i);
    return -1;
}

MgdunModel MgdunModel::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    MgdunModel m;
    m.cfg_ = cfg;
    m.seed_ = seed;
    Rng rng(seed);
    const int c = cfg.channels, w = cfg.unet_width;

    for (int i = 0; i < cfg.unet_depth; ++i) {
        const std::string p = "denoiser.enc" + std::to_string(i + 1);
        m.unet_.enc.push_back({m.add_conv(p + ".conv1", w, i == 0 ? c : w, 3, 1.0f, rng),
                               m.add_conv(p + ".conv2", w, w, 3, 1.0f, rng)});
    }
    for (int i = 0; i < cfg.unet_depth; ++i) {
        const std::string p = "denoiser.dec" + std::to_string(i + 1);
        m.unet_.dec.push_back({m.add_conv(p + ".conv1", w, 2 * w, 3, 1.0f, rng),
                               m.add_conv(p + ".conv2", w, w, 3, 1.0f, rng)});
    }
    m.unet_.head = m.add_conv("denoiser.head", c, w, 3, kLastConvGain, rng);

    const int half = 2 * c;  // channels of each coupling half after unshuffle
    for (int k = 0; k < cfg.inn_blocks; ++k) {
        const std::string p = "inn.block" + std::to_string(k + 1);
        InnBlockIds b;
        b.phi = {m.add_conv(p + ".phi.conv1", cfg.inn_hidden, half, 3, 1.0f, rng),
                 m.add_conv(p + ".phi.conv2", half, cfg.inn_hidden, 3, kLastConvGain, rng)};
        b.rho = {m.add_conv(p + ".rho.conv1", cfg.inn_hidden, half, 3, 1.0f, rng),
                 m.add_conv(p + ".rho.conv2", half, cfg.inn_hidden, 3, kLastConvGain, rng)};
        b.tau = {m.add_conv(p + ".tau.conv1", cfg.inn_hidden, half, 3, 1.0f, rng),
                 m.add_conv(p + ".tau.conv2", half, cfg.inn_hidden, 3, kLastConvGain, rng)};
        m.inn_.push_back(b);
    }

    m.up_ = {m.add_conv("up.conv1", kSamplerWidth, c, 3, 1.0f, rng),
             m.add_conv("up.conv2", kSamplerWidth, kSamplerWidth, 3, 1.0f, rng),
             m.add_conv("up.conv3", c, kSamplerWidth, 3, kLastConvGain, rng)};
    m.down_ = {m.add_conv("down.conv1", kSamplerWidth, c, 3, 1.0f, rng),
               m.add_conv("down.conv2", kSamplerWidth, kSamplerWidth, 3, 1.0f, rng),
               m.add_conv("down.conv3", c, kSamplerWidth, 3, kLastConvGain, rng)};

    auto scalar = [&](const std::string& name, float v) {
        Tensor t({1, 1, 1, 1});
        t[0] = v;
        return m.add_param(name, std::move(t));
    };
    for (int t = 0; t < cfg.stages; ++t) {
        const std::string p = "stage" + std::to_string(t + 1);
        StageIds s;
        s.delta3 = scalar(p + ".delta3", 0.1f);
        s.eta = scalar(p + ".eta", 0.1f);
        s.beta1 = scalar(p + ".beta1", 0.5f);
        s.beta2 = scalar(p + ".beta2", 0.5f);
        s.xi1 = scalar(p + ".xi1", 0.1f);
        s.xi2 = scalar(p + ".xi2", 0.1f);
        m.stages_.push_back(s);
    }
    return m;
}

BoundModel bind_model(Tape& tape, const MgdunModel& m, bool requires_grad) {
    BoundModel bm;
    bm.model = &m;
    bm.requires_grad = requires_grad;
    bm.params.reserve(std::size_t(m.param_count()));
    for (int i = 0; i < m.param_count(); ++i)
        bm.params.push_back(tape.leaf(m.param(i), requires_grad));
    return bm;
}

namespace {

Var conv3(Tape& t, const BoundModel& bm, ConvIds ids, Var x) {
    return t.conv2d(x, bm[ids.w], bm[ids.b], 1, 1);
}

Var coupling_subnet(Tape& t, const BoundModel& bm,
                    const std::array<ConvIds, 2>& net, Var x) {
    return conv3(t, bm, net[1], t.relu(conv3(t, bm, net[0], x)));
}

}  // namespace

Var unet_apply(Tape& t, const BoundModel& bm, Var x) {
    const auto& u = bm.model->unet();
    const int depth = int(u.enc.size());
    Var cur = x;
    std::vector<Var> skips;
    std::vector<bool> pooled;
    int pools = 0;
    for (int i = 0; i < depth; ++i) {
        cur = t.relu(conv3(t, bm, u.enc[std::size_t(i)][0], cur));
        cur = t.relu(conv3(t, bm, u.enc[std::size_t(i)][1], cur));
        skips.push_back(cur);
        const Shape s = t.val(cur).shape();
        const bool can_pool = s.h % 2 == 0 && s.w % 2 == 0 && s.h >= 2 && s.w >= 2;
        pooled.push_back(can_pool);
        if (can_pool) {
            cur = t.maxpool2(cur);
            ++pools;
        }
    }
    if (pools < depth)
        std::fprintf(stderr,
                     "[mgdun] denoiser: input %s allows only %d of %d pooling "
                     "levels; running reduced\n",
                     t.val(x).shape().str().c_str(), pools, depth);
    for (int i = depth - 1; i >= 0; --i) {
        if (pooled[std::size_t(i)]) cur = t.upsample_nearest2(cur);
        cur = t.concat_c(cur, skips[std::size_t(i)]);
        cur = t.relu(conv3(t, bm, u.dec[std::size_t(i)][0], cur));
        cur = t.relu(conv3(t, bm, u.dec[std::size_t(i)][1], cur));
    }
    return t.add(x, conv3(t, bm, u.head, cur));
}

Var denoise_module(Tape& t, const BoundModel& bm, Var prev, Var z, Var xi) {
    require(t.val(prev).shape() == t.val(z).shape(),
            "denoise_module: shape mismatch " + t.val(prev).shape().str() + " vs " +
                t.val(z).shape().str());
    return unet_apply(t, bm, t.add(prev, t.scale_by(z, xi)));
}

Var inn_forward(Tape& t, const BoundModel& bm, Var z) {
    Var u = t.pixel_unshuffle2(z);
    const int c4 = t.val(u).shape().c;
    Var z1 = t.slice_c(u, 0, c4 / 2);
    Var z2 = t.slice_c(u, c4 / 2, c4);
    for (const auto& blk : bm.model->inn()) {
        Var t1 = t.add(z1, coupling_subnet(t, bm, blk.phi, z2));
        Var r = t.clamp_elem(coupling_subnet(t, bm, blk.rho, t1), -kExpClamp, kExpClamp);
        Var t2 = t.add(t.hadamard(z2, t.exp_elem(r)),
                       coupling_subnet(t, bm, blk.tau, t1));
        z1 = t1;
        z2 = t2;
    }
    return t.pixel_shuffle2(t.concat_c(z1, z2));
}

Var inn_backward(Tape& t, const BoundModel& bm, Var y) {
    Var u = t.pixel_unshuffle2(y);
    const int c4 = t.val(u).shape().c;
    Var t1 = t.slice_c(u, 0, c4 / 2);
    Var t2 = t.slice_c(u, c4 / 2, c4);
    const auto& blocks = bm.model->inn();
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) {
        Var r = t.clamp_elem(coupling_subnet(t, bm, it->rho, t1), -kExpClamp, kExpClamp);
        Var z2 = t.hadamard(t.sub(t2, coupling_subnet(t, bm, it->tau, t1)),
                            t.exp_elem(t.negate(r)));
        Var z1 = t.sub(t1, coupling_subnet(t, bm, it->phi, z2));
        t1 = z1;
        t2 = z2;
    }
    return t.pixel_shuffle2(t.concat_c(t1, t2));
}

namespace {

int log2_scale(int scale) { return scale == 2 ? 1 : 2; }

}  // namespace

Var down_block(Tape& t, const BoundModel& bm, Var z) {
    const auto& d = bm.model->down();
    Var cur = t.relu(conv3(t, bm, d.c1, z));
    for (int i = 0; i < log2_scale(bm.model->config().scale); ++i)
        cur = t.maxpool2(cur);
    cur = t.relu(conv3(t, bm, d.c2, cur));
    return conv3(t, bm, d.c3, cur);
}

Var up_block(Tape& t, const BoundModel& bm, Var x) {
    const auto& u = bm.model->up();
    Var cur = t.relu(conv3(t, bm, u.c1, x));
    for (int i = 0; i < log2_scale(bm.model->config().scale); ++i)
        cur = t.upsample_nearest2(cur);
    cur = t.relu(conv3(t, bm, u.c2, cur));
    return conv3(t, bm, u.c3, cur);
}

Var recon_step(Tape& t, const BoundModel& bm, Var z, Var x, Var y, Var u, Var v,
               int stage) {
    const auto& s = bm.model->stage_ids()[std::size_t(stage)];
    Var r1 = up_block(t, bm, t.sub(down_block(t, bm, z), x));
    Var r2 = inn_backward(t, bm, t.sub(inn_forward(t, bm, z), y));
    Var inner = t.add(t.add(r1, t.scale_by(r2, bm[s.eta])),
                      t.add(t.scale_by(t.sub(z, u), bm[s.beta1]),
                            t.scale_by(t.sub(z, v), bm[s.beta2])));
    return t.sub(z, t.scale_by(inner, bm[s.delta3]));
}

Var mgdun_forward(Tape& t, const BoundModel& bm, Var x, Var y) {
    const ModelConfig& cfg = bm.model->config();
    const Shape xs = t.val(x).shape();
    const Shape ys = t.val(y).shape();
    require(xs.c == cfg.channels && ys.c == cfg.channels,
            "mgdun_forward: channel mismatch for x " + xs.str() + " / y " + ys.str());
    require(ys.h == xs.h * cfg.scale && ys.w == xs.w * cfg.scale && ys.n == xs.n,
            "mgdun_forward: guide " + ys.str() + " must be scale x target " + xs.str());
    const int div = 1 << cfg.unet_depth;
    require(ys.h % div == 0 && ys.w % div == 0,
            "mgdun_forward: HR dims " + ys.str() + " must be divisible by " +
                std::to_string(div));

    Var z = t.leaf(bicubic_resize(t.val(x), cfg.scale, true));
    Var u = z, v = z;
    for (int st = 0; st < cfg.stages; ++st) {
        const auto& sid = bm.model->stage_ids()[std::size_t(st)];
        u = denoise_module(t, bm, u, z, bm[sid.xi1]);
        v = denoise_module(t, bm, v, z, bm[sid.xi2]);
        z = recon_step(t, bm, z, x, y, u, v, st);
    }
    return z;
}

// --- tensor-level wrappers ---------------------------------------------------

Tensor mgdun_forward(const MgdunModel& m, const Tensor& x, const Tensor& y) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    return t.val(mgdun_forward(t, bm, t.leaf(x), t.leaf(y)));
}

Tensor inn_forward(const MgdunModel& m, const Tensor& z) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    return t.val(inn_forward(t, bm, t.leaf(z)));
}

Tensor inn_backward(const MgdunModel& m, const Tensor& y) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    return t.val(inn_backward(t, bm, t.leaf(y)));
}

Tensor denoise_module(const MgdunModel& m, const Tensor& prev, const Tensor& z,
                      float xi) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    Tensor xit({1, 1, 1, 1});
    xit[0] = xi;
    return t.val(denoise_module(t, bm, t.leaf(prev), t.leaf(z), t.leaf(xit)));
}

Tensor down_block(const MgdunModel& m, const Tensor& z) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    return t.val(down_block(t, bm, t.leaf(z)));
}

Tensor up_block(const MgdunModel& m, const Tensor& x) {
    Tape t;
    BoundModel bm = bind_model(t, m, false);
    return t.val(up_block(t, bm, t.leaf(x)));
}

}  // namespace mgdun
