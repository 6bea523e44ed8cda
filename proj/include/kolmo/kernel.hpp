#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "kolmo/group.hpp"
#include "kolmo/matrixcalc.hpp"

namespace kolmo {

struct Covariance {
    double t = 0.0;
    Matrix C;
    Matrix Cinv;
    double logdet = 0.0;
};

/// Everything Gamma needs at a fixed time gap s = t - tau.
struct KernelSlice {
    double s = 0.0;
    Matrix E;       // exp(-sB)
    Matrix C;       // C(s)
    Matrix Cinv;
    Matrix Cprime;  // E(s) A~ E(s)^T
    Matrix L;       // lower Cholesky factor of 2C(s)
    double logdet = 0.0;
    double prefactor = 0.0;  // (4 pi)^{-N/2} det C^{-1/2} e^{-s tr B}
};

inline constexpr int kKernelPanels = 4;

class KernelContext {
public:
    explicit KernelContext(OperatorSpec spec, int panels = kKernelPanels);

    const OperatorSpec& spec() const { return spec_; }
    const Exponents& exps() const { return exps_; }
    int panels() const { return panels_; }
    double trace_B() const { return trace_B_; }

    Covariance covariance(double t) const;
    /// Cached slice; keys are quantized to 1e-12.
    std::shared_ptr<const KernelSlice> slice(double s) const;
    size_t cache_size() const;

private:
    std::shared_ptr<const KernelSlice> build_slice(double s) const;

    OperatorSpec spec_;
    Exponents exps_;
    int panels_;
    double trace_B_;
    Matrix A_tilde_;
    mutable std::shared_mutex mutex_;
    mutable std::map<long long, std::shared_ptr<const KernelSlice>> cache_;
};

struct GammaValue {
    double value = 0.0;
    bool pole = false;
};

/// Gamma(z, zeta); zero for t <= tau, with the pole flagged at t = tau, x = xi.
GammaValue gamma_value(const KernelContext& ctx, const Point& z, const Point& zeta);
double gamma(const KernelContext& ctx, const Point& z, const Point& zeta);
/// Gradient in x (all N coordinates).
Vector gamma_grad(const KernelContext& ctx, const Point& z, const Point& zeta);
/// Full N x N Hessian in x.
Matrix gamma_hess(const KernelContext& ctx, const Point& z, const Point& zeta);
/// Top-left m x m block of the Hessian.
Matrix gamma_hess_m(const KernelContext& ctx, const Point& z, const Point& zeta);
/// Y applied in the z variable.
double gamma_Y(const KernelContext& ctx, const Point& z, const Point& zeta);

/// sum a_ij d^2 Gamma + Y Gamma at z.
double check_kernel_pde(const KernelContext& ctx, const Point& z, const Point& zeta);

/// Gamma(delta_r z, 0) r^Q / Gamma(z, 0); requires B = B_0.
double check_homogeneity(const KernelContext& ctx, const Point& z, double r);

struct MassReport {
    double mass = 0.0;
    double expected = 0.0;
    double refinement_change = 0.0;
};

/// Integral of x -> Gamma((x,t), 0) by tensor Gauss-Legendre in whitened
/// coordinates.
MassReport kernel_mass(const KernelContext& ctx, double t, int panels = 4, int order = 10);

struct ChapmanReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double rel_error = 0.0;
    double refinement_change = 0.0;
};

/// int Gamma((x,t),(y,s)) Gamma((y,s),(xi,tau)) dy against Gamma((x,t),(xi,tau)).
ChapmanReport chapman_kolmogorov(const KernelContext& ctx, const Point& z, double s, const Point& zeta,
                                 int panels = 4, int order = 10);

struct BoundsReport {
    int samples = 0;
    double c_gamma = 0.0;             // sup Gamma d^Q
    std::vector<double> c_grad;       // sup |d_j Gamma| d^{Q + alpha_j}
    double c_hess = 0.0;              // sup |d_ij Gamma| d^{Q+2}, i, j <= m
    double c_Y = 0.0;                 // sup |Y Gamma| d^{Q+2}
    std::vector<double> annulus_R;
    std::vector<double> annulus_sup;  // sup Gamma R^Q over the annulus configuration
};

BoundsReport check_bounds(const KernelContext& ctx, int samples, double R0, std::uint64_t seed,
                          const std::vector<double>& annulus_R = {1.0, 0.5, 0.25});

}  // namespace kolmo
