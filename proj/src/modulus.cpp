#include "kolmo/modulus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kolmo/error.hpp"

namespace kolmo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kTailFitPoints = 8;
constexpr double kNonDiniRatio = 0.8;

/// (e^{g h} - 1) / g, continuous at g = 0.
double expm1_ratio(double g, double h) { return std::abs(g * h) < 1e-12 ? h : std::expm1(g * h) / g; }

/// Exponent of the least-squares power fit through the smallest radii.
double tail_exponent(const ModulusTable& t) {
    const size_t n = std::min<size_t>(kTailFitPoints, t.radii.size());
    if (t.omega.front() == 0.0) return kInf;
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        if (t.omega[i] <= 0.0) return kInf;
        const double x = std::log(t.radii[i]);
        const double y = std::log(t.omega[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

/// omega at r; power-law interpolation between nodes, tail model below r_min
/// and a constant above r_max.
double omega_at(const ModulusTable& t, double beta, double r) {
    const auto& R = t.radii;
    const auto& W = t.omega;
    if (r <= R.front()) {
        if (W.front() == 0.0) return 0.0;
        return W.front() * std::pow(r / R.front(), std::isfinite(beta) ? std::max(beta, 0.0) : 0.0);
    }
    if (r >= R.back()) return W.back();
    const size_t i = static_cast<size_t>(std::upper_bound(R.begin(), R.end(), r) - R.begin()) - 1;
    const double u = std::log(r / R[i]) / std::log(R[i + 1] / R[i]);
    if (W[i] > 0.0 && W[i + 1] > 0.0) return W[i] * std::pow(W[i + 1] / W[i], u);
    return W[i] + (W[i + 1] - W[i]) * u;
}

/// int_{a}^{b} omega(r) r^{-p} dr over one interval with omega given at its ends.
double piece(double a, double wa, double b, double wb, int p) {
    const double h = std::log(b / a);
    const double scale = std::pow(a, 1 - p);
    if (wa > 0.0 && wb > 0.0) {
        const double beta = std::log(wb / wa) / h;
        return wa * scale * expm1_ratio(beta + 1 - p, h);
    }
    // Linear in log r.
    const double slope = (wb - wa) / h;
    if (p == 1) return 0.5 * h * (wa + wb);
    const double e = std::exp(-h);
    return scale * (wa * (1.0 - e) + slope * (1.0 - e * (1.0 + h)));
}

/// int_{lo}^{hi} omega(r) r^{-p} dr with lo >= r_min.
double integrate_table(const ModulusTable& t, double beta, double lo, double hi, int p) {
    if (hi <= lo) return 0.0;
    std::vector<double> nodes{lo};
    for (double r : t.radii) {
        if (r > lo && r < hi) nodes.push_back(r);
    }
    nodes.push_back(hi);
    double sum = 0.0;
    for (size_t i = 0; i + 1 < nodes.size(); ++i) {
        sum += piece(nodes[i], omega_at(t, beta, nodes[i]), nodes[i + 1], omega_at(t, beta, nodes[i + 1]), p);
    }
    return sum;
}

/// int_0^{r} omega(s)/s ds below r_min under the tail model.
double tail_integral(const ModulusTable& t, double beta, double r) {
    const double w = omega_at(t, beta, r);
    if (w == 0.0) return 0.0;
    if (!(beta > 1e-3)) return kInf;
    return w / beta;
}

struct Sample {
    double d;
    double diff;
};

}  // namespace

void validate_table(const ModulusTable& t) {
    if (t.radii.empty() || t.radii.size() != t.omega.size()) {
        throw Error(ErrorKind::Domain, "modulus table needs matching, nonempty radii and values");
    }
    for (size_t i = 0; i < t.radii.size(); ++i) {
        if (!(t.radii[i] > 0.0 && t.radii[i] <= 1.0)) throw Error(ErrorKind::Domain, "modulus radii must lie in (0, 1]");
        if (i > 0 && !(t.radii[i] > t.radii[i - 1])) throw Error(ErrorKind::Domain, "modulus radii must increase");
        if (!(t.omega[i] >= 0.0) || !std::isfinite(t.omega[i])) {
            throw Error(ErrorKind::Domain, "modulus values must be finite and nonnegative");
        }
        if (i > 0 && t.omega[i] < t.omega[i - 1]) throw Error(ErrorKind::Domain, "modulus values must be nondecreasing");
    }
}

std::vector<double> default_radii(int count, double r_min) {
    if (count < 2 || !(r_min > 0.0 && r_min < 1.0)) throw Error(ErrorKind::Domain, "default_radii: bad grid");
    std::vector<double> r(static_cast<size_t>(count));
    const double lr = std::log2(r_min);
    for (int i = 0; i < count; ++i) r[static_cast<size_t>(i)] = std::exp2(lr * (1.0 - double(i) / (count - 1)));
    r.back() = 1.0;
    return r;
}

ModulusTable analytic_table(const std::function<double(double)>& omega, const std::vector<double>& radii) {
    ModulusTable t;
    t.radii = radii;
    t.provenance = Provenance::Analytic;
    for (double r : radii) t.omega.push_back(omega(r));
    validate_table(t);
    return t;
}

ModulusTable empirical_modulus(const std::function<double(const Point&)>& f, const BallDomain& dom, int pair_samples,
                               const std::vector<double>& radii, std::uint64_t seed) {
    if (!(dom.R > 0.0)) throw Error(ErrorKind::Domain, "empirical_modulus: empty domain");
    if (pair_samples < 1000) throw Error(ErrorKind::Domain, "empirical_modulus: at least 1000 pair samples required");
    if (dom.center.N() != dom.spec.N) throw Error(ErrorKind::Dimension, "empirical_modulus: center dimension");
    ModulusTable shape{radii, std::vector<double>(radii.size(), 0.0), Provenance::Empirical};
    validate_table(shape);

    const Exponents exps = exponents_of(dom.spec.blocks);
    Rng rng(seed);
    std::vector<Sample> samples;
    samples.reserve(static_cast<size_t>(pair_samples));
    const int per_scale = std::max(1, pair_samples / static_cast<int>(radii.size()));
    auto inside = [&](const Point& p) { return kdist(p, dom.center, dom.spec, exps) <= dom.R; };
    // Base points are the center, points near the center at the current
    // scale, and points spread over the whole domain.
    for (double r : radii) {
        for (int j = 0; j < per_scale; ++j) {
            Point z = dom.center;
            if (j % 4 == 1 || j % 4 == 2) {
                z = sample_ball(dom.spec, exps, dom.center, std::min(dom.R, 2.0 * r), rng);
            } else if (j % 4 == 3) {
                z = sample_ball(dom.spec, exps, dom.center, dom.R, rng);
            }
            const Point zeta = sample_ball(dom.spec, exps, z, r, rng);
            if (!inside(z) || !inside(zeta)) continue;
            samples.push_back({kdist(z, zeta, dom.spec, exps), std::abs(f(z) - f(zeta))});
        }
    }
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.d < b.d; });
    size_t k = 0;
    double running = 0.0;
    for (size_t i = 0; i < radii.size(); ++i) {
        while (k < samples.size() && samples[k].d < radii[i]) running = std::max(running, samples[k++].diff);
        if (!std::isfinite(running)) throw Error(ErrorKind::Domain, "empirical_modulus: f is not finite on the domain");
        shape.omega[i] = running;
    }
    return shape;
}

std::string to_string(DiniClass c) { return c == DiniClass::Dini ? "dini" : "non-dini"; }

DiniReport dini_integral(const ModulusTable& t) {
    validate_table(t);
    DiniReport rep;
    const double beta = tail_exponent(t);
    rep.tail_exponent = beta;
    const double r_min = t.radii.front();
    rep.value = integrate_table(t, beta, r_min, 1.0, 1);
    rep.tail_bound = tail_integral(t, beta, r_min);

    double upper = 1.0;
    for (double lower = 0.1; lower >= r_min * (1 - 1e-12); lower *= 0.1) {
        rep.decade_increments.push_back(integrate_table(t, beta, lower, upper, 1));
        upper = lower;
    }
    const auto& inc = rep.decade_increments;
    rep.classification = DiniClass::Dini;
    if (inc.size() >= 2 && inc.back() > 0.0) {
        const double ratio = inc.back() / inc[inc.size() - 2];
        if (ratio > kNonDiniRatio) rep.classification = DiniClass::NonDini;
    }
    return rep;
}

double schauder_functional(const ModulusTable& t, double d) {
    if (!(d > 0.0 && d < 1.0)) throw Error(ErrorKind::Domain, "schauder_functional: d must lie in (0, 1)");
    validate_table(t);
    const double beta = tail_exponent(t);
    const double r_min = t.radii.front();
    double near = 0.0;
    if (d <= r_min) {
        near = tail_integral(t, beta, d);
    } else {
        near = tail_integral(t, beta, r_min) + integrate_table(t, beta, r_min, d, 1);
    }
    double far = 0.0;
    if (d < r_min) {
        // omega(r) = omega(r_min) (r / r_min)^beta on (d, r_min).
        const double w = t.omega.front();
        if (w > 0.0) far += piece(d, omega_at(t, beta, d), r_min, w, 2);
        far += integrate_table(t, beta, r_min, 1.0, 2);
    } else {
        far = integrate_table(t, beta, d, 1.0, 2);
    }
    return near + d * far;
}

double holder_closed_form(double M, double alpha, double d) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Domain, "holder_closed_form: alpha must lie in (0, 1]");
    if (!(d > 0.0 && d < 1.0)) throw Error(ErrorKind::Domain, "holder_closed_form: d must lie in (0, 1)");
    if (alpha == 1.0) return M * d * std::abs(std::log(d));
    return M * std::pow(d, alpha) / (alpha * (1.0 - alpha));
}

double holder_seminorm(const std::function<double(const Point&)>& f, const BallDomain& dom, double alpha, int samples,
                       std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Domain, "holder_seminorm: alpha must lie in (0, 1]");
    if (!(dom.R > 0.0)) throw Error(ErrorKind::Domain, "holder_seminorm: empty domain");
    const Exponents exps = exponents_of(dom.spec.blocks);
    const std::vector<double> scales = default_radii(32, 0x1.0p-20);
    Rng rng(seed);
    double best = 0.0;
    for (int j = 0; j < samples; ++j) {
        const double r = dom.R * scales[static_cast<size_t>(j) % scales.size()];
        const Point z = sample_ball(dom.spec, exps, dom.center, dom.R, rng);
        const Point zeta = sample_ball(dom.spec, exps, z, r, rng);
        const double d = kdist(z, zeta, dom.spec, exps);
        if (d == 0.0) continue;
        best = std::max(best, std::abs(f(z) - f(zeta)) / std::pow(d, alpha));
    }
    return best;
}

namespace {

struct LogTerms {
    double rho2;
    double ell;  // |log(x^2 + y^2)|
};

LogTerms counterexample_terms(double alpha, double x, double y) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Domain, "counterexample: alpha must lie in (0, 1]");
    const double rho2 = x * x + y * y;
    if (rho2 == 0.0) throw Error(ErrorKind::Domain, "counterexample: undefined at the origin");
    if (!(rho2 < 1.0)) throw Error(ErrorKind::Domain, "counterexample: requires x^2 + y^2 < 1");
    return {rho2, -std::log(rho2)};
}

}  // namespace

double counterexample_u(double alpha, double x, double y) {
    const auto [rho2, ell] = counterexample_terms(alpha, x, y);
    (void)rho2;
    return x * y * std::pow(ell, alpha);
}

double counterexample_f(double alpha, double x, double y) {
    const auto [rho2, ell] = counterexample_terms(alpha, x, y);
    const double q = x * y / rho2;
    return -8.0 * alpha * q * std::pow(ell, alpha - 1.0) + 4.0 * alpha * (alpha - 1.0) * q * std::pow(ell, alpha - 2.0);
}

double counterexample_mixed(double alpha, double x, double y) {
    const auto [rho2, ell] = counterexample_terms(alpha, x, y);
    const double q2 = x * x * y * y / (rho2 * rho2);
    return std::pow(ell, alpha) - 2.0 * alpha * std::pow(ell, alpha - 1.0) +
           q2 * (4.0 * alpha * (alpha - 1.0) * std::pow(ell, alpha - 2.0) + 4.0 * alpha * std::pow(ell, alpha - 1.0));
}

double counterexample_f_extended(double alpha, double x, double y) {
    if (x == 0.0 && y == 0.0) return 0.0;
    return counterexample_f(alpha, x, y);
}

}  // namespace kolmo
