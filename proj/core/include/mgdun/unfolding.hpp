// The unfolded reconstruction network: T stages, each running two
// shared-weight U-Net denoising modules, an invertible cross-modal transform
// built from affine coupling blocks around a pixel-shuffle pair, learned
// Up/Down resampling blocks, and a gradient-style reconstruction step with
// learnable per-stage scalars.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mgdun/autodiff.hpp"
#include "mgdun/tensor.hpp"

namespace mgdun {

struct ModelConfig {
    int channels = 1;     // C, shared by target and guide
    int scale = 2;        // in {2, 4}
    int stages = 4;       // T
    int inn_blocks = 2;
    int unet_width = 64;  // C', denoiser feature width
    int unet_depth = 4;   // encoder blocks; each pools when dims allow
    int inn_hidden = 16;  // width of the coupling subnets

    void validate() const;
};

struct ConvIds {
    int w = -1, b = -1;
};

class MgdunModel {
public:
    struct UnetIds {
        std::vector<std::array<ConvIds, 2>> enc;
        std::vector<std::array<ConvIds, 2>> dec;
        ConvIds head;
    };
    struct InnBlockIds {
        std::array<ConvIds, 2> phi, rho, tau;
    };
    struct SamplerIds {
        ConvIds c1, c2, c3;
    };
    struct StageIds {
        int delta3 = -1, eta = -1, beta1 = -1, beta2 = -1, xi1 = -1, xi2 = -1;
    };

    // He-uniform conv weights (final conv of each composite scaled down so the
    // untrained network starts near the bicubic baseline), zero biases,
    // per-stage scalars (delta3, eta, beta1, beta2, xi1, xi2) =
    // (0.1, 0.1, 0.5, 0.5, 0.1, 0.1).
    static MgdunModel init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    int param_count() const { return int(params_.size()); }
    const std::string& param_name(int id) const { return names_[std::size_t(id)]; }
    Tensor& param(int id) { return params_[std::size_t(id)]; }
    const Tensor& param(int id) const { return params_[std::size_t(id)]; }
    int find_param(std::string_view name) const;

    const UnetIds& unet() const { return unet_; }
    const std::vector<InnBlockIds>& inn() const { return inn_; }
    const SamplerIds& up() const { return up_; }
    const SamplerIds& down() const { return down_; }
    const std::vector<StageIds>& stage_ids() const { return stages_; }

private:
    int add_param(std::string name, Tensor t);
    ConvIds add_conv(const std::string& name, int out_c, int in_c, int k,
                     float gain, class Rng& rng);

    ModelConfig cfg_;
    std::uint64_t seed_ = 0;
    std::vector<std::string> names_;
    std::vector<Tensor> params_;
    UnetIds unet_;
    std::vector<InnBlockIds> inn_;
    SamplerIds up_, down_;
    std::vector<StageIds> stages_;
};

// Per-tape binding of the model's parameters as gradient-bearing leaves.
struct BoundModel {
    const MgdunModel* model = nullptr;
    std::vector<Var> params;
    bool requires_grad = true;

    Var operator[](int id) const { return params[std::size_t(id)]; }
};

BoundModel bind_model(Tape& tape, const MgdunModel& m, bool requires_grad = true);

// --- graph builders ---------------------------------------------------------
// Residual U-Net: out = x + net(x). Pools only while spatial dims stay even;
// a reduced pool count is logged once per call.
Var unet_apply(Tape& t, const BoundModel& bm, Var x);
// DM(prev + xi * z) with the shared denoiser.
Var denoise_module(Tape& t, const BoundModel& bm, Var prev, Var z, Var xi);
Var inn_forward(Tape& t, const BoundModel& bm, Var z);
Var inn_backward(Tape& t, const BoundModel& bm, Var y);
Var down_block(Tape& t, const BoundModel& bm, Var z);  // HR -> LR
Var up_block(Tape& t, const BoundModel& bm, Var x);    // LR -> HR
// Z - delta3*( Up(Down(Z)-X) + eta*P^-1(P(Z)-Y) + beta1*(Z-U) + beta2*(Z-V) )
Var recon_step(Tape& t, const BoundModel& bm, Var z, Var x, Var y, Var u, Var v,
               int stage);
// Full network from an LR target leaf and an HR guide leaf.
Var mgdun_forward(Tape& t, const BoundModel& bm, Var x, Var y);

// --- tensor-level conveniences (build a throwaway tape, no gradients) -------
Tensor mgdun_forward(const MgdunModel& m, const Tensor& x, const Tensor& y);
Tensor inn_forward(const MgdunModel& m, const Tensor& z);
Tensor inn_backward(const MgdunModel& m, const Tensor& y);
Tensor denoise_module(const MgdunModel& m, const Tensor& prev, const Tensor& z,
                      float xi);
Tensor down_block(const MgdunModel& m, const Tensor& z);
Tensor up_block(const MgdunModel& m, const Tensor& x);

}  // namespace mgdun
