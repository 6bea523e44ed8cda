#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kolmo/error.hpp"
#include "kolmo/group.hpp"

namespace kolmo {

enum class Provenance { Empirical, Analytic };

struct ModulusTable {
    std::vector<double> radii;  // strictly increasing, in (0, 1]
    std::vector<double> omega;  // nonnegative, nondecreasing
    Provenance provenance = Provenance::Analytic;
};

/// Throws Domain unless the table satisfies its invariants.
void validate_table(const ModulusTable& table);

/// 64 log-spaced radii from 2^-20 to 1.
std::vector<double> default_radii(int count = 64, double r_min = 0x1.0p-20);

ModulusTable analytic_table(const std::function<double(double)>& omega, const std::vector<double>& radii);

/// Q_R(center) in the geometry of `spec`.
struct BallDomain {
    OperatorSpec spec;
    Point center;
    double R = 1.0;
};

/// Empirical sup of |f(z) - f(zeta)| over sampled pairs with kdist(z, zeta) < r,
/// for each r in `radii`, made nondecreasing by a running max.
ModulusTable empirical_modulus(const std::function<double(const Point&)>& f, const BallDomain& domain,
                               int pair_samples, const std::vector<double>& radii, std::uint64_t seed = 1);

enum class DiniClass { Dini, NonDini };

std::string to_string(DiniClass c);

struct DiniReport {
    double value = 0.0;       // integral of omega(r)/r over [r_min, 1]
    double tail_bound = 0.0;  // model bound for (0, r_min); infinite when the fit does not decay
    double tail_exponent = 0.0;
    DiniClass classification = DiniClass::Dini;
    std::vector<double> decade_increments;  // partial integral gained per decade, from r = 1 down
};

DiniReport dini_integral(const ModulusTable& table);

/// int_0^d omega(r)/r dr + d int_d^1 omega(r)/r^2 dr, with the same tail model.
double schauder_functional(const ModulusTable& table, double d);

/// M d^alpha / (alpha (1 - alpha)) for alpha < 1 and M d |log d| for alpha = 1.
double holder_closed_form(double M, double alpha, double d);

/// Empirical sup of |f(z) - f(zeta)| / kdist(z, zeta)^alpha.
double holder_seminorm(const std::function<double(const Point&)>& f, const BallDomain& domain, double alpha,
                       int samples, std::uint64_t seed = 1);

// Laplacian counterexample, with log read as |log(x^2 + y^2)|.

double counterexample_u(double alpha, double x, double y);
double counterexample_f(double alpha, double x, double y);
double counterexample_mixed(double alpha, double x, double y);

/// counterexample_f extended by continuity (value 0) to the origin.
double counterexample_f_extended(double alpha, double x, double y);

}  // namespace kolmo
