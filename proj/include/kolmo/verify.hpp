#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kolmo/error.hpp"
#include "kolmo/fields.hpp"
#include "kolmo/group.hpp"
#include "kolmo/kernel.hpp"
#include "kolmo/modulus.hpp"

namespace kolmo {

using CoefficientFn = std::function<Matrix(const Point&)>;

/// Variable diffusion coefficients a_ij(x, t), i, j <= m.
struct VarCoeff {
    std::string name;
    CoefficientFn a;
    ModulusTable omega_a;
    double lambda = 0.0;  // smallest eigenvalue seen on the validation sample
    double Lambda = 0.0;
};

/// Axis-aligned box containing the support of f.
struct SupportBox {
    Vector lo;
    Vector hi;
    double t_lo = 0.0;
    double t_hi = 0.0;
};

struct ManufacturedProblem {
    std::string family;
    OperatorSpec spec;
    JetFn jet;
    C2Bundle u;
    ScalarFn f;  // sum a_ij d_ij u + Y u
    CoefficientFn a;
    std::optional<VarCoeff> varcoeff;
    SupportBox support;
    double fd_mismatch = 0.0;
};

/// Families: "zero", "one", "gauss", "gauss2", "polybump"; optional scale
/// multiplies u. Coefficient ids: "const", "sin" (a_11 = A_11 + sin(x_1)/2),
/// "sin2" (amplitude 1).
ManufacturedProblem manufacture(const std::string& family, const OperatorSpec& spec,
                                const std::optional<std::string>& varcoeff = std::nullopt, double scale = 1.0);

/// Re-checks f against apply_L_fd on 100 points of Q_1; throws Manufacture when
/// the relative mismatch exceeds 1e-6. Returns the mismatch.
double validate_manufactured(const ManufacturedProblem& problem);

VarCoeff make_varcoeff(const std::string& id, const OperatorSpec& spec, std::uint64_t seed = 1);

inline constexpr double kFdStep = 1e-3;

/// sum a_ij d_ij u + Y u by central differences with one Richardson halving.
double apply_L_fd(const OperatorSpec& spec, const ScalarFn& u, const Point& z, double h = kFdStep);
double apply_L_fd(const OperatorSpec& spec, const CoefficientFn& a, const ScalarFn& u, const Point& z,
                  double h = kFdStep);

struct ConvolutionOptions {
    int s_panels = 8;
    int v_panels = 4;
    int order = 8;
    double rel_tol = 1e-4;
    int max_doublings = 3;
};

struct ConvolutionResult {
    double value = 0.0;
    double refinement_change = 0.0;
};

/// -int Gamma(z, zeta) f(zeta) d zeta for f supported in `box`.
ConvolutionResult convolve_solution(const KernelContext& ctx, const ScalarFn& f, const SupportBox& box, const Point& z,
                                    const ConvolutionOptions& opt = {});

// Cut-off --------------------------------------------------------------------------

/// Quintic smoothstep: 1 on [0, 3R/4], 0 on [R, inf).
double cutoff_chi(double s, double R);
double cutoff_eta(double R, const Point& z, const Exponents& exps);
/// Almost-everywhere gradient of eta_R in x.
Vector cutoff_eta_grad(double R, const Point& z, const Exponents& exps);

struct CutoffReport {
    double R = 0.0;
    std::vector<double> grad_scaled;  // sup |d_{x_i} eta_R| R^{alpha_i}
    double dt_scaled = 0.0;           // sup |d_t eta_R| R^2
};

/// Central-difference sups of the derivatives of eta_R over sampled points of Q_R(0).
CutoffReport cutoff_report(double R, const Exponents& exps, int samples, std::uint64_t seed);

// Reports ----------------------------------------------------------------------

struct EstimateRow {
    std::string quantity;
    double scale = 0.0;  // R or d
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

struct EstimateReport {
    std::string name;
    std::string criterion;
    std::uint64_t seed = 0;
    int samples = 0;
    std::vector<EstimateRow> rows;
    std::map<std::string, double> constants;
    std::vector<double> scales;
    std::map<std::string, std::vector<double>> scaling;
    bool pass = false;
};

struct VerifyOptions {
    int poles = 20;
    int points = 200;  // evaluation points per scale
    int sup_points = 400;
    int pair_samples = 1000;
    int modulus_samples = 20000;
    std::uint64_t seed = 1;
    double stable_factor = 4.0;
    double seed_factor = 2.0;
};

struct NamedJet {
    std::string name;
    JetFn jet;
};

/// Harmonic test family on Q_R(0): kernel translates with poles below the
/// cylinder, a constant and (when the first row of B vanishes) x_1.
std::vector<NamedJet> harmonic_family(const KernelContext& ctx, double R, int poles, std::uint64_t seed);

EstimateReport verify_apriori(const KernelContext& ctx, const std::vector<double>& R_list,
                              const VerifyOptions& opt = {});

EstimateReport verify_mean_value(const KernelContext& ctx, const std::vector<double>& R_list,
                                 const VerifyOptions& opt = {});

enum class SingularKind { Const, G1, G2 };
std::string to_string(SingularKind k);
SingularKind parse_singular_kind(const std::string& s);

struct SingularOptions {
    int points = 6;
    int sigma_panels = 8;
    int v_panels = 6;
    int order = 8;
    double rel_tol = 1e-2;
    std::uint64_t seed = 1;
};

/// All second derivatives d_ij w, i, j <= m, of w = int Gamma(z, .) eta_R g.
Matrix singular_hessian(const KernelContext& ctx, SingularKind kind, double R, const Point& z,
                        const SingularOptions& opt = {}, double* refinement_change = nullptr);

EstimateReport verify_singular_bounds(const KernelContext& ctx, SingularKind kind, const std::vector<double>& R_list,
                                      const SingularOptions& opt = {});

EstimateReport verify_schauder_const(const KernelContext& ctx, const ManufacturedProblem& problem,
                                     const VerifyOptions& opt = {});

EstimateReport verify_schauder_var(const KernelContext& ctx, const ManufacturedProblem& problem,
                                   const VerifyOptions& opt = {});

struct InvarianceOptions {
    int samples = 50;
    bool dilation = true;
    std::uint64_t seed = 1;
    double tol = 1e-5;
};

EstimateReport verify_invariance(const KernelContext& ctx, const InvarianceOptions& opt = {});

}  // namespace kolmo
