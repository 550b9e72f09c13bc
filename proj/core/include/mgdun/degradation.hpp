// Explicit linear observation operators: 3x3 Gaussian blur K, decimation D,
// their composition DK and exact adjoint, the linear cross-modal map P with
// its adjoint, plus synthetic paired-contrast problem generation.
//
// Boundary handling for all 3x3 convolutions here is reflect padding of one
// pixel; the adjoints account for it exactly, so every (A, A^T) pair passes
// the dot-product test to rounding error. Decimation keeps the top-left
// sample of each scale x scale block.

#pragma once

#include <cstdint>

#include "mgdun/tensor.hpp"

namespace mgdun {

Tensor gaussian_kernel3(float sigma);  // (1,1,3,3), entries sum to 1

struct DegradationOp {
    Tensor blur_kernel;     // (1,1,3,3) normalized Gaussian
    int scale = 2;          // in {2, 4}
    float noise_std1 = 0.0f;

    static DegradationOp make(float sigma, int scale, float noise_std1 = 0.0f);
};

struct LinearCrossModalOp {
    Tensor kernel;          // (1,1,kh,kw) small fixed kernel
    float gain = 1.0f;
    float noise_std2 = 0.0f;

    // Pure intensity scaling: delta kernel with the given gain.
    static LinearCrossModalOp identity(float gain = 1.0f, float noise_std2 = 0.0f);
    // Gentle 3x3 Gaussian smoothing with gain.
    static LinearCrossModalOp gauss3(float sigma, float gain, float noise_std2 = 0.0f);
};

struct ReconProblem {
    Tensor x;       // LR target, n = h x w grid
    Tensor y;       // HR guide, N = H x W grid
    Tensor z;       // optional ground truth at HR grid (empty when absent)
    int scale = 2;

    bool has_ground_truth() const { return !z.empty(); }
};

Tensor apply_dk(const Tensor& z_hr, const DegradationOp& op);
Tensor apply_dk_adjoint(const Tensor& x_lr, const DegradationOp& op);
Tensor apply_p(const Tensor& z_hr, const LinearCrossModalOp& op);
Tensor apply_p_adjoint(const Tensor& y_hr, const LinearCrossModalOp& op);

// Catmull-Rom (a = -0.5) separable resampling by an integer factor in {2,4}.
Tensor bicubic_resize(const Tensor& x, int factor, bool upscale);

// --- synthetic paired-contrast phantoms -------------------------------------

struct PhantomSpec {
    std::uint64_t seed = 0;
    int height = 64, width = 64;
    int ellipses = 6;
    // affine maps from tissue base value to intensity, one per contrast
    float target_scale = 1.0f, target_offset = 0.0f;
    float guide_scale = -0.8f, guide_offset = 0.9f;
};

struct PhantomPair {
    Tensor target;  // contrast 1, HR grid, values in [0,1]
    Tensor guide;   // contrast 2, same geometry, values in [0,1]
};

// Piecewise-constant random-ellipse phantom; both contrasts share the exact
// same tissue geometry and differ only through the two affine intensity maps.
PhantomPair make_phantom(const PhantomSpec& spec);

// Z = phantom target; X = clip01(DK Z + N(0, noise_std1));
// Y = clip01(P Z + N(0, noise_std2)). Deterministic in spec.seed.
ReconProblem synth_problem(const PhantomSpec& spec, const DegradationOp& op,
                           const LinearCrossModalOp& cross);

}  // namespace mgdun
