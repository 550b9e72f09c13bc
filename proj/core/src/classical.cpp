#include "mgdun/classical.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mgdun/metrics.hpp"
#include "mgdun/rng.hpp"

namespace mgdun {

void SolverParams::validate() const {
    require(eta >= 0.0f, "SolverParams: eta must be >= 0");
    require(lambda1 >= 0.0f && lambda2 >= 0.0f, "SolverParams: lambda must be >= 0");
    require(beta1 > 0.0f && beta2 > 0.0f, "SolverParams: beta must be > 0");
    require(iters >= 0, "SolverParams: iters must be >= 0");
}

Tensor prox_l1(const Tensor& v, float threshold) {
    require(threshold >= 0.0f, "prox_l1: threshold must be >= 0");
    Tensor out(v.shape());
    for (std::int64_t i = 0; i < v.numel(); ++i) {
        const float a = std::fabs(v[i]) - threshold;
        out[i] = a > 0.0f ? std::copysign(a, v[i]) : 0.0f;
    }
    return out;
}

namespace {

inline float resolved_delta(float delta, float beta) {
    return delta > 0.0f ? delta : 1.0f / beta;
}

Tensor prox_step(const Tensor& prev, const Tensor& z, float delta, float beta,
                 float lambda) {
    // prev - delta * beta * (prev - z), then soft threshold at delta*lambda
    Tensor arg(prev.shape());
    const float db = delta * beta;
    for (std::int64_t i = 0; i < prev.numel(); ++i)
        arg[i] = prev[i] - db * (prev[i] - z[i]);
    return prox_l1(arg, delta * lambda);
}

}  // namespace

Tensor update_u(const HqsState& s, const SolverParams& p) {
    require(s.u.shape() == s.z.shape(), "update_u: U/Z shape mismatch " +
                                            s.u.shape().str() + " vs " + s.z.shape().str());
    return prox_step(s.u, s.z, resolved_delta(p.delta1, p.beta1), p.beta1, p.lambda1);
}

Tensor update_v(const HqsState& s, const SolverParams& p) {
    require(s.v.shape() == s.z.shape(), "update_v: V/Z shape mismatch " +
                                            s.v.shape().str() + " vs " + s.z.shape().str());
    return prox_step(s.v, s.z, resolved_delta(p.delta2, p.beta2), p.beta2, p.lambda2);
}

Tensor grad_z(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
              const LinearCrossModalOp& p_op, const SolverParams& p) {
    // (DK)^T(DK Z - X) + eta P^T(P Z - Y) + beta1 (Z - U) + beta2 (Z - V)
    Tensor g = apply_dk_adjoint(sub(apply_dk(s.z, dk), pr.x), dk);
    if (p.eta != 0.0f) {
        Tensor gp = apply_p_adjoint(sub(apply_p(s.z, p_op), pr.y), p_op);
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += p.eta * gp[i];
    }
    for (std::int64_t i = 0; i < g.numel(); ++i)
        g[i] += p.beta1 * (s.z[i] - s.u[i]) + p.beta2 * (s.z[i] - s.v[i]);
    return g;
}

Tensor update_z(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
                const LinearCrossModalOp& p_op, const SolverParams& p) {
    Tensor g = grad_z(s, pr, dk, p_op, p);
    Tensor z(s.z.shape());
    for (std::int64_t i = 0; i < g.numel(); ++i) z[i] = s.z[i] - p.delta3 * g[i];
    return z;
}

double objective(const HqsState& s, const ReconProblem& pr, const DegradationOp& dk,
                 const LinearCrossModalOp& p_op, const SolverParams& p) {
    double obj = 0.5 * sum_sq(sub(pr.x, apply_dk(s.z, dk)));
    if (p.eta != 0.0f)
        obj += 0.5 * double(p.eta) * sum_sq(sub(pr.y, apply_p(s.z, p_op)));
    obj += 0.5 * double(p.beta1) * sum_sq(sub(s.u, s.z));
    obj += 0.5 * double(p.beta2) * sum_sq(sub(s.v, s.z));
    if (p.lambda1 != 0.0f) {
        double l1 = 0.0;
        for (std::int64_t i = 0; i < s.u.numel(); ++i) l1 += std::fabs(double(s.u[i]));
        obj += double(p.lambda1) * l1;
    }
    if (p.lambda2 != 0.0f) {
        double l1 = 0.0;
        for (std::int64_t i = 0; i < s.v.numel(); ++i) l1 += std::fabs(double(s.v[i]));
        obj += double(p.lambda2) * l1;
    }
    return obj;
}

namespace {

Tensor hessian_apply(const Tensor& z, const DegradationOp& dk,
                     const LinearCrossModalOp& p_op, const SolverParams& p,
                     bool with_beta) {
    Tensor out = apply_dk_adjoint(apply_dk(z, dk), dk);
    if (p.eta != 0.0f) {
        Tensor gp = apply_p_adjoint(apply_p(z, p_op), p_op);
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += p.eta * gp[i];
    }
    if (with_beta) {
        const float b = p.beta1 + p.beta2;
        for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b * z[i];
    }
    return out;
}

}  // namespace

double power_iteration_lipschitz(const ReconProblem& pr, const DegradationOp& dk,
                                 const LinearCrossModalOp& p_op, const SolverParams& p,
                                 int iters, std::uint64_t seed) {
    Shape hr{pr.x.shape().n, pr.x.shape().c, pr.x.shape().h * pr.scale,
             pr.x.shape().w * pr.scale};
    Tensor v(hr);
    Rng rng(seed);
    rng.fill_uniform(v, -1.0f, 1.0f);
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        Tensor av = hessian_apply(v, dk, p_op, p, true);
        const double nrm = std::sqrt(sum_sq(av));
        if (nrm == 0.0) return p.beta1 + p.beta2;
        lam = dot(v, av) / sum_sq(v);
        for (std::int64_t i = 0; i < v.numel(); ++i) v[i] = float(av[i] / nrm);
    }
    return lam;
}

SolveResult solve(const ReconProblem& pr, const DegradationOp& dk,
                  const LinearCrossModalOp& p_op, SolverParams p) {
    p.validate();
    SolveResult res;
    if (p.delta3 <= 0.0f)
        res.lipschitz = power_iteration_lipschitz(pr, dk, p_op, p);
    if (p.delta3 <= 0.0f) p.delta3 = float(0.9 / res.lipschitz);
    res.effective = p;

    HqsState s;
    s.z = bicubic_resize(pr.x, pr.scale, true);
    s.u = s.z;
    s.v = s.z;

    const double initial = objective(s, pr, dk, p_op, p);
    res.trace.push_back({0, initial,
                         pr.has_ground_truth() ? psnr(s.z, pr.z)
                                               : std::numeric_limits<double>::quiet_NaN()});
    for (s.t = 1; s.t <= p.iters; ++s.t) {
        s.u = update_u(s, p);
        s.v = update_v(s, p);
        s.z = update_z(s, pr, dk, p_op, p);
        const double obj = objective(s, pr, dk, p_op, p);
        res.trace.push_back({s.t, obj,
                             pr.has_ground_truth()
                                 ? psnr(s.z, pr.z)
                                 : std::numeric_limits<double>::quiet_NaN()});
        if (!std::isfinite(obj) || obj > 1e6 * (initial + 1e-30))
            throw std::runtime_error(
                "solve: diverged at iteration " + std::to_string(s.t) + " (objective " +
                std::to_string(obj) + " vs initial " + std::to_string(initial) +
                "); reduce delta3");
    }
    res.z = std::move(s.z);
    return res;
}

int cg_solve(const LinearFn& apply_a, const Tensor& b, Tensor& x, double tol,
             int max_iters) {
    if (x.shape() != b.shape()) x = Tensor(b.shape());
    Tensor r = sub(b, apply_a(x));
    Tensor p = r;
    double rr = sum_sq(r);
    const double bnorm = std::sqrt(sum_sq(b));
    if (bnorm == 0.0) {
        x = Tensor(b.shape());
        return 0;
    }
    for (int it = 1; it <= max_iters; ++it) {
        Tensor ap = apply_a(p);
        const double alpha = rr / dot(p, ap);
        for (std::int64_t i = 0; i < x.numel(); ++i) {
            x[i] = float(x[i] + alpha * p[i]);
            r[i] = float(r[i] - alpha * ap[i]);
        }
        const double rr_new = sum_sq(r);
        if (std::sqrt(rr_new) < tol * bnorm) return it;
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::int64_t i = 0; i < p.numel(); ++i) p[i] = float(r[i] + beta * p[i]);
    }
    return -1;
}

Tensor cg_quadratic_oracle(const ReconProblem& pr, const DegradationOp& dk,
                           const LinearCrossModalOp& p_op, const SolverParams& p,
                           const Tensor& u, const Tensor& v) {
    require(p.lambda1 == 0.0f && p.lambda2 == 0.0f,
            "cg_quadratic_oracle: requires lambda1 = lambda2 = 0");
    // With U, V given this solves the Z-subproblem system including the
    // (beta1+beta2) I term. With both empty it solves the joint-equilibrium
    // normal equations (the beta terms cancel at U = V = Z), which is the
    // limit the PGD iteration converges to when lambda = 0.
    const bool with_beta = !u.empty() || !v.empty();
    Tensor b = apply_dk_adjoint(pr.x, dk);
    if (p.eta != 0.0f) {
        Tensor py = apply_p_adjoint(pr.y, p_op);
        for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += p.eta * py[i];
    }
    if (!u.empty())
        for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += p.beta1 * u[i];
    if (!v.empty())
        for (std::int64_t i = 0; i < b.numel(); ++i) b[i] += p.beta2 * v[i];

    Tensor z(b.shape());
    const int max_iters = int(10 * b.numel());
    const int used = cg_solve(
        [&](const Tensor& t) { return hessian_apply(t, dk, p_op, p, with_beta); }, b,
        z, 1e-8, max_iters);
    if (used < 0)
        throw std::runtime_error("cg_quadratic_oracle: no convergence within " +
                                 std::to_string(max_iters) + " iterations");
    return z;
}

}  // namespace mgdun
