#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kolmo/group.hpp"
#include "kolmo/kernel.hpp"

namespace kolmo {

/// Value and derivatives of a smooth function of (x, t).
struct Jet {
    double u = 0.0;
    Vector grad;  // all N spatial first derivatives
    Matrix hess;  // N x N
    double ut = 0.0;
};

using JetFn = std::function<Jet(const Point&)>;
using ScalarFn = std::function<double(const Point&)>;

/// The derivatives entering the class C^2_L: d_{x_i} u and d_{x_i x_j} u for
/// i, j <= m, and the Lie derivative Y u.
struct C2Bundle {
    std::string name;
    ScalarFn u;
    std::function<Vector(const Point&)> grad_m;
    std::function<Matrix(const Point&)> hess_m;
    ScalarFn Yu;
};

C2Bundle bundle_from_jet(const std::string& name, JetFn jet, const OperatorSpec& spec);

/// Y u = <Bx, D u> - d_t u from a jet.
double lie_from_jet(const Jet& j, const Point& z, const OperatorSpec& spec);

// Analytic families -----------------------------------------------------------

enum class BumpShape { Gauss, Poly };

/// u = amp F(q), q = sum ((x_i - c_i)/sigma_i)^2 + ((t - c_t)/sigma_t)^2 with
/// F(q) = exp(-q) or (1 - q)_+^4.
struct BumpParams {
    BumpShape shape = BumpShape::Gauss;
    double amp = 1.0;
    Vector center;
    double center_t = 0.0;
    Vector sigma;
    double sigma_t = 1.0;
};

Jet bump_jet(const BumpParams& p, const Point& z);
JetFn bump(const BumpParams& p);

/// Monomial prod x_i^{e_i} t^{e_t}.
JetFn monomial(std::vector<int> exponents, int time_exponent);

JetFn constant(double c, int n);

/// Gamma(., pole) with its derivatives; the time derivative comes from
/// d_t Gamma = <Bx, D Gamma> - Y Gamma.
JetFn kernel_translate(const KernelContext& ctx, Point pole);

/// sin(x_0) cos(t) + x_0^2 x_{N-1}: smooth, with a nonzero Y component.
JetFn trig_mix(int n);

/// Named bundles for the Taylor suite.
std::vector<C2Bundle> taylor_suite(const OperatorSpec& spec);

/// Bundles of intrinsic degree at most two: 1, t, x_i and x_i x_j for i, j <= m.
std::vector<C2Bundle> degree_two_suite(const OperatorSpec& spec);

/// Largest deviation of grad_m / hess_m / Yu from central differences of u.
double bundle_fd_mismatch(const C2Bundle& b, const OperatorSpec& spec, const std::vector<Point>& points,
                          double h = 1e-4);

}  // namespace kolmo
