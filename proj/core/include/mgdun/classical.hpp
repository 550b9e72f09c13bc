// Reference iterative reconstruction: half-quadratic splitting with proximal
// gradient descent updates, an l1 prior with closed-form soft-threshold prox,
// and a conjugate-gradient oracle for the regularizer-free quadratic case.

#pragma once

#include <functional>
#include <vector>

#include "mgdun/degradation.hpp"
#include "mgdun/tensor.hpp"

namespace mgdun {

struct SolverParams {
    float eta = 0.5f;       // guide-fidelity weight
    float lambda1 = 0.0f;   // l1 weight on U
    float lambda2 = 0.0f;   // l1 weight on V
    float beta1 = 0.5f;     // quadratic coupling penalties
    float beta2 = 0.5f;
    float delta1 = 0.0f;    // U step; <= 0 means 1/beta1 (exact prox step)
    float delta2 = 0.0f;    // V step; <= 0 means 1/beta2
    float delta3 = 0.0f;    // Z step; <= 0 means 0.9/L with L from power iteration
    int iters = 100;

    void validate() const;
};

struct HqsState {
    Tensor z, u, v;
    int t = 0;
};

struct TraceRow {
    int iter = 0;
    double objective = 0.0;
    double psnr = 0.0;      // NaN when no ground truth
};

struct SolveResult {
    Tensor z;
    std::vector<TraceRow> trace;
    double lipschitz = 0.0;  // power-iteration estimate used for delta3
    SolverParams effective;  // params with auto steps resolved
};

// Elementwise soft threshold sign(v) * max(|v| - threshold, 0).
Tensor prox_l1(const Tensor& v, float threshold);

Tensor update_u(const HqsState& s, const SolverParams& p);
Tensor update_v(const HqsState& s, const SolverParams& p);
Tensor grad_z(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
              const LinearCrossModalOp& p_op, const SolverParams& p);
Tensor update_z(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
                const LinearCrossModalOp& p_op, const SolverParams& p);

// 1/2||X-DKZ||^2 + eta/2||Y-PZ||^2 + beta1/2||U-Z||^2 + beta2/2||V-Z||^2
//   + lambda1||U||_1 + lambda2||V||_1
double objective(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
                 const LinearCrossModalOp& p_op, const SolverParams& p);

// Largest eigenvalue of (DK)^T DK + eta P^T P + (beta1+beta2) I.
double power_iteration_lipschitz(const ReconProblem& pr, const DegradationOp& dk,
                                 const LinearCrossModalOp& p_op, const SolverParams& p,
                                 int iters = 60, std::uint64_t seed = 17);

// Init Z = U = V = bicubic(X), then `iters` rounds of (U, V, Z) updates.
// Throws on divergence (objective above 1e6 x initial).
SolveResult solve(const ReconProblem& pr, const DegradationOp& dk,
                  const LinearCrossModalOp& p_op, SolverParams p);

// Matrix-free CG for SPD systems; returns iterations used, -1 on failure to
// reach `tol` (relative residual) within max_iters.
using LinearFn = std::function<Tensor(const Tensor&)>;
int cg_solve(const LinearFn& apply_a, const Tensor& b, Tensor& x, double tol,
             int max_iters);

// Solves ((DK)^T DK + eta P^T P + (beta1+beta2) I) Z
//        = (DK)^T X + eta P^T Y + beta1 U + beta2 V
// to relative residual < 1e-8. Requires lambda1 = lambda2 = 0. Passing empty
// u and v drops the beta terms on both sides, yielding the joint-equilibrium
// system that the PGD iteration converges to.
Tensor cg_quadratic_oracle(const ReconProblem& pr, const DegradationOp& dk,
                           const LinearCrossModalOp& p_op, const SolverParams& p,
                           const Tensor& u, const Tensor& v);

}  // namespace mgdun
