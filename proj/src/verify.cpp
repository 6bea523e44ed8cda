#include "kolmo/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kolmo/parallel.hpp"

namespace kolmo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWhitenedCut = 8.0;

Point y_flow(const OperatorSpec& spec, const Point& z, double s) { return {mat_exp(s * spec.B) * z.x, z.t - s}; }

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Matrix constant_coefficients(const OperatorSpec& spec, const Point&) { return spec.A; }

double f_from_jet(const Jet& j, const Point& z, const OperatorSpec& spec, const Matrix& a) {
    double diffusion = 0.0;
    for (int i = 0; i < spec.m; ++i)
        for (int k = 0; k < spec.m; ++k) diffusion += a(i, k) * j.hess(i, k);
    return diffusion + lie_from_jet(j, z, spec);
}

bool first_row_vanishes(const OperatorSpec& spec) { return spec.B.row(0).cwiseAbs().maxCoeff() == 0.0; }

std::vector<Point> unit_samples(const Exponents& exps, double R, int count, Rng& rng) {
    std::vector<Point> out;
    out.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) out.push_back(sample_unit_ball(exps, R, rng));
    return out;
}

std::vector<Point> dilated(const std::vector<Point>& pts, double R, const Exponents& exps) {
    std::vector<Point> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(dilate(R, p, exps));
    return out;
}

/// Stable iff every value is finite and max/min over the sweep is at most `factor`.
bool stable(const std::vector<double>& vals, double factor) {
    double lo = kInf, hi = 0.0;
    for (double v : vals) {
        if (!std::isfinite(v) || v < 0.0) return false;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == 0.0) return true;
    return lo > 0.0 && hi / lo <= factor;
}

// Whitened quadrature --------------------------------------------------------------
//
// For s = t - tau, Gamma(z, (xi, tau)) d xi equals the standard normal density
// in v, where xi = exp(sB)(x - L v) and L L^T = 2 C(s).

struct SNode {
    double s;
    double w;
};

std::vector<SNode> linear_nodes(double a, double b, int panels, int order) {
    std::vector<SNode> out;
    const auto rule = composite_rule(a, b, panels, order);
    for (size_t k = 0; k < rule.nodes.size(); ++k) out.push_back({rule.nodes[k], rule.weights[k]});
    return out;
}

/// Nodes in s = sigma^2 for integrands with an s^{-1/2} edge at s = a = 0.
std::vector<SNode> sqrt_nodes(double a, double b, int panels, int order) {
    std::vector<SNode> out;
    const auto rule = composite_rule(std::sqrt(a), std::sqrt(b), panels, order);
    for (size_t k = 0; k < rule.nodes.size(); ++k) {
        const double sg = rule.nodes[k];
        out.push_back({sg * sg, 2.0 * sg * rule.weights[k]});
    }
    return out;
}

struct Whitened {
    double s = 0.0;
    Matrix Einv;  // exp(sB)
    Matrix M;     // exp(sB) L
    Vector xe;    // exp(sB) x
    Matrix Linv;
};

template <class Visit>
void for_each_whitened(const KernelContext& ctx, const Point& z, const SupportBox& box, const std::vector<SNode>& nodes,
                       int v_panels, int order, double s_floor, Visit&& visit) {
    const OperatorSpec& spec = ctx.spec();
    const int n = spec.N;
    const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * n);
    std::vector<double> v(static_cast<size_t>(n)), y(static_cast<size_t>(n));
    double s_max = 0.0;
    for (const auto& node : nodes) s_max = std::max(s_max, node.s);
    for (const auto& node : nodes) {
        // The covariance is numerically singular this close to the pole.
        if (!(node.s > s_floor * s_max)) continue;
        const auto sl = ctx.slice(node.s);
        Whitened W;
        W.s = node.s;
        W.Einv = E_of(spec.B, -node.s);
        W.M = W.Einv * sl->L;
        W.xe = W.Einv * z.x;
        W.Linv = sl->L.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));

        Vector lo = Vector::Constant(n, kInf), hi = Vector::Constant(n, -kInf);
        Vector corner(n);
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            for (int i = 0; i < n; ++i) corner[i] = (mask >> i) & 1u ? box.hi[i] : box.lo[i];
            const Vector vc = W.Linv * (z.x - sl->E * corner);
            lo = lo.cwiseMin(vc);
            hi = hi.cwiseMax(vc);
        }
        std::vector<QuadratureRule> rules;
        bool empty = false;
        for (int i = 0; i < n; ++i) {
            const double a = std::max(lo[i], -kWhitenedCut), b = std::min(hi[i], kWhitenedCut);
            if (!(a < b)) {
                empty = true;
                break;
            }
            rules.push_back(composite_rule(a, b, v_panels, order));
        }
        if (empty) continue;

        std::vector<size_t> idx(static_cast<size_t>(n), 0);
        const size_t per_dim = rules[0].nodes.size();
        while (true) {
            double w = node.w * norm;
            double q = 0.0;
            for (int i = 0; i < n; ++i) {
                const auto& r = rules[static_cast<size_t>(i)];
                v[static_cast<size_t>(i)] = r.nodes[idx[static_cast<size_t>(i)]];
                w *= r.weights[idx[static_cast<size_t>(i)]];
                q += v[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
            }
            w *= std::exp(-0.5 * q);
            for (int i = 0; i < n; ++i) {
                double acc = W.xe[i];
                for (int k = 0; k < n; ++k) acc -= W.M(i, k) * v[static_cast<size_t>(k)];
                y[static_cast<size_t>(i)] = acc;
            }
            visit(W, v, y, z.t - node.s, w);
            size_t d = 0;
            while (d < idx.size() && ++idx[d] == per_dim) idx[d++] = 0;
            if (d == idx.size()) break;
        }
    }
}

void check_box(const SupportBox& box, int n) {
    if (box.lo.size() != n || box.hi.size() != n)
        throw Error(ErrorKind::Dimension, "support box dimension does not match the spec");
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(box.lo[i]) || !std::isfinite(box.hi[i]) || !(box.lo[i] < box.hi[i]))
            throw Error(ErrorKind::Domain, "support box must be a nonempty finite box");
    }
    if (!std::isfinite(box.t_lo) || !std::isfinite(box.t_hi) || !(box.t_lo < box.t_hi))
        throw Error(ErrorKind::Domain, "support box must have a nonempty finite time range");
}

// Singular integrals ----------------------------------------------------------

struct Density {
    SingularKind kind;
    double R;
    const Exponents* exps;

    double g(const Point& z) const {
        switch (kind) {
            case SingularKind::Const: return 1.0;
            case SingularKind::G1: return z.x[0];
            case SingularKind::G2: return z.x[0] * z.x[0];
        }
        return 1.0;
    }

    /// Gradient of eta_R g in x.
    Vector grad(const Point& z) const {
        Vector out = g(z) * cutoff_eta_grad(R, z, *exps);
        if (kind == SingularKind::Const) return out;
        const double eta = cutoff_eta(R, z, *exps);
        out[0] += kind == SingularKind::G1 ? eta : 2.0 * eta * z.x[0];
        return out;
    }
};

Matrix singular_hessian_at(const KernelContext& ctx, const Density& dens, const Point& z, int sigma_panels,
                           int v_panels, int order, double& magnitude) {
    const OperatorSpec& spec = ctx.spec();
    const int n = spec.N, m = spec.m;
    const double R = dens.R;
    SupportBox box;
    box.lo.resize(n);
    box.hi.resize(n);
    for (int i = 0; i < n; ++i) {
        const double h = std::pow(R, dens.exps->alpha[static_cast<size_t>(i)]);
        box.lo[i] = -h;
        box.hi[i] = h;
    }
    const double s_max = z.t + R * R;
    Matrix H = Matrix::Zero(m, m);
    magnitude = 0.0;
    if (!(s_max > 0.0)) return H;
    Point zeta = Point::origin(n);
    Vector G(m), score(m);
    for_each_whitened(ctx, z, box, sqrt_nodes(0.0, s_max, sigma_panels, order), v_panels, order, 1e-4,
                      [&](const Whitened& W, const std::vector<double>& v, const std::vector<double>& y, double tau,
                          double w) {
                          for (int i = 0; i < n; ++i) zeta.x[i] = y[static_cast<size_t>(i)];
                          zeta.t = tau;
                          if (knorm(zeta, *dens.exps) >= R) return;
                          const Vector dF = dens.grad(zeta);
                          for (int i = 0; i < m; ++i) {
                              double gi = 0.0, sc = 0.0;
                              for (int k = 0; k < n; ++k) {
                                  gi += W.Einv(k, i) * dF[k];
                                  sc += W.Linv(k, i) * v[static_cast<size_t>(k)];
                              }
                              G[i] = gi;
                              score[i] = sc;
                          }
                          for (int i = 0; i < m; ++i)
                              for (int j = 0; j < m; ++j) H(i, j) -= w * score[j] * G[i];
                          magnitude += w * score.cwiseAbs().maxCoeff() * G.cwiseAbs().maxCoeff();
                      });
    return 0.5 * (H + H.transpose());
}

// Schauder ratios ---------------------------------------------------------------

struct SchauderSetup {
    double sup_u = 0.0;
    double sup_f = 0.0;
    double eta = 0.0;  // max_ij sup |d_ij u|
    ModulusTable omega_f;
};

SchauderSetup schauder_setup(const ManufacturedProblem& p, const VerifyOptions& opt) {
    const Exponents exps = exponents_of(p.spec.blocks);
    Rng rng(opt.seed);
    SchauderSetup s;
    auto pts = unit_samples(exps, 1.0, opt.sup_points, rng);
    pts.push_back(Point::origin(p.spec.N));
    for (const auto& z : pts) {
        s.sup_u = std::max(s.sup_u, std::abs(p.u.u(z)));
        s.sup_f = std::max(s.sup_f, std::abs(p.f(z)));
        s.eta = std::max(s.eta, max_abs(p.u.hess_m(z)));
    }
    s.omega_f = empirical_modulus(p.f, BallDomain{p.spec, Point::origin(p.spec.N), 1.0}, opt.modulus_samples,
                                  default_radii(), opt.seed);
    return s;
}

double second_order_gap(const C2Bundle& u, const Point& z, const Point& zeta) {
    return std::max(max_abs(u.hess_m(z) - u.hess_m(zeta)), std::abs(u.Yu(z) - u.Yu(zeta)));
}

EstimateReport schauder_report(const KernelContext& ctx, const ManufacturedProblem& p, const VerifyOptions& opt,
                               const ModulusTable* omega_a, const std::string& name) {
    const OperatorSpec& spec = ctx.spec();
    const Exponents& exps = ctx.exps();
    const SchauderSetup s = schauder_setup(p, opt);
    EstimateReport rep;
    rep.name = name;
    rep.criterion = "fitted constants finite";
    rep.seed = opt.seed;
    rep.samples = opt.pair_samples;

    const Point o = Point::origin(spec.N);
    const DiniReport dini = dini_integral(s.omega_f);
    const double lhs_i = std::max(max_abs(p.u.hess_m(o)), std::abs(p.u.Yu(o)));
    const double rhs_i = s.sup_u + std::abs(p.f(o)) + dini.value + dini.tail_bound;
    const double c_i = lhs_i == 0.0 ? 0.0 : lhs_i / rhs_i;
    rep.rows.push_back({"i", 0.0, lhs_i, rhs_i, c_i});

    Rng rng(opt.seed ^ 0x5bd1e995ULL);
    double c_ii = 0.0;
    int used = 0;
    while (used < opt.pair_samples) {
        const Point z = sample_unit_ball(exps, 0.25, rng);
        const Point zeta = sample_unit_ball(exps, 0.25, rng);
        const double d = kdist(z, zeta, spec, exps);
        if (!(d > 0.0) || d >= 1.0) continue;
        ++used;
        const double lhs = second_order_gap(p.u, z, zeta);
        double rhs = d * s.sup_u + d * s.sup_f + schauder_functional(s.omega_f, d);
        if (omega_a) rhs += s.eta * schauder_functional(*omega_a, d);
        const double ratio = lhs == 0.0 ? 0.0 : lhs / rhs;
        c_ii = std::max(c_ii, ratio);
        rep.rows.push_back({"ii", d, lhs, rhs, ratio});
    }
    rep.constants["C_i"] = c_i;
    rep.constants["C_ii"] = c_ii;
    rep.constants["sup_u"] = s.sup_u;
    rep.constants["sup_f"] = s.sup_f;
    rep.constants["dini_f"] = dini.value + dini.tail_bound;
    if (omega_a) rep.constants["eta"] = s.eta;
    rep.pass = std::isfinite(c_i) && std::isfinite(c_ii);
    return rep;
}

}  // namespace

// Manufactured problems --------------------------------------------------------------

VarCoeff make_varcoeff(const std::string& id, const OperatorSpec& spec, std::uint64_t seed) {
    VarCoeff vc;
    vc.name = id;
    double amp = 0.0;
    if (id == "const") {
        amp = 0.0;
    } else if (id == "sin") {
        amp = 0.5;
    } else if (id == "sin2") {
        amp = 1.0;
    } else {
        throw Error(ErrorKind::Usage, "unknown coefficient family '" + id + "'");
    }
    const Matrix A = spec.A;
    if (amp == 0.0) {
        vc.a = [A](const Point&) { return A; };
        vc.omega_a = analytic_table([](double) { return 0.0; }, default_radii());
    } else {
        vc.a = [A, amp](const Point& z) {
            Matrix a = A;
            a(0, 0) += amp * std::sin(z.x[0]);
            return a;
        };
        vc.omega_a = empirical_modulus([amp](const Point& z) { return amp * std::sin(z.x[0]); },
                                       BallDomain{spec, Point::origin(spec.N), 1.0}, 20000, default_radii(), seed);
    }

    const Exponents exps = exponents_of(spec.blocks);
    Rng rng(seed + 17);
    vc.lambda = kInf;
    vc.Lambda = 0.0;
    for (int k = 0; k < 200; ++k) {
        const Point z = k == 0 ? Point::origin(spec.N) : sample_unit_ball(exps, 1.0, rng);
        const Matrix a = vc.a(z);
        if (asymmetry(a) > 1e-14) throw Error(ErrorKind::Symmetry, "coefficients are not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        vc.lambda = std::min(vc.lambda, es.eigenvalues().minCoeff());
        vc.Lambda = std::max(vc.Lambda, es.eigenvalues().maxCoeff());
    }
    if (!(vc.lambda > 0.0)) throw Error(ErrorKind::Ellipticity, "coefficients '" + id + "' lose ellipticity on Q_1");
    return vc;
}

double validate_manufactured(const ManufacturedProblem& p) {
    const Exponents exps = exponents_of(p.spec.blocks);
    Rng rng(7);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        const Point z = sample_unit_ball(exps, 1.0, rng);
        const double fz = p.f(z);
        const double err = std::abs(apply_L_fd(p.spec, p.a, p.u.u, z) - fz) / std::max(1.0, std::abs(fz));
        worst = std::max(worst, err);
    }
    if (!(worst <= 1e-6))
        throw Error(ErrorKind::Manufacture, "analytic L u of '" + p.family + "' disagrees with finite differences");
    return worst;
}

ManufacturedProblem manufacture(const std::string& family, const OperatorSpec& spec,
                                const std::optional<std::string>& varcoeff, double scale) {
    validate_structure(spec);
    const int n = spec.N;
    ManufacturedProblem p;
    p.family = family;
    p.spec = spec;
    p.support.lo = Vector::Constant(n, -1.0);
    p.support.hi = Vector::Constant(n, 1.0);
    p.support.t_lo = -1.0;
    p.support.t_hi = 1.0;

    auto bump_problem = [&](BumpParams b, double reach) {
        b.amp = scale;
        p.jet = bump(b);
        p.support.lo = b.center - reach * b.sigma;
        p.support.hi = b.center + reach * b.sigma;
        p.support.t_lo = b.center_t - reach * b.sigma_t;
        p.support.t_hi = b.center_t + reach * b.sigma_t;
    };
    if (family == "zero") {
        p.jet = constant(0.0, n);
    } else if (family == "one") {
        p.jet = constant(scale, n);
    } else if (family == "gauss" || family == "gauss2") {
        BumpParams b;
        b.shape = BumpShape::Gauss;
        const bool second = family == "gauss2";
        b.center = Vector::Constant(n, second ? -0.2 : 0.1);
        b.center_t = second ? 0.15 : -0.1;
        b.sigma = Vector::Constant(n, second ? 0.5 : 0.7);
        b.sigma_t = second ? 0.6 : 0.8;
        bump_problem(b, 7.5);
    } else if (family == "polybump") {
        BumpParams b;
        b.shape = BumpShape::Poly;
        b.center = Vector::Constant(n, 0.05);
        b.center_t = 0.1;
        b.sigma = Vector::Constant(n, 1.6);
        b.sigma_t = 1.5;
        bump_problem(b, 1.0);
    } else {
        throw Error(ErrorKind::Usage, "unknown manufactured family '" + family + "'");
    }

    if (varcoeff) {
        p.varcoeff = make_varcoeff(*varcoeff, spec);
        p.a = p.varcoeff->a;
    } else {
        p.a = [spec](const Point& z) { return constant_coefficients(spec, z); };
    }
    p.u = bundle_from_jet(family, p.jet, spec);
    const JetFn jet = p.jet;
    const CoefficientFn a = p.a;
    p.f = [jet, a, spec](const Point& z) { return f_from_jet(jet(z), z, spec, a(z)); };

    p.fd_mismatch = validate_manufactured(p);
    return p;
}

// Finite differences ----------------------------------------------------------

double apply_L_fd(const OperatorSpec& spec, const ScalarFn& u, const Point& z, double h) {
    return apply_L_fd(spec, [&spec](const Point& p) { return constant_coefficients(spec, p); }, u, z, h);
}

double apply_L_fd(const OperatorSpec& spec, const CoefficientFn& a, const ScalarFn& u, const Point& z, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::Domain, "apply_L_fd: h must be positive");
    if (z.N() != spec.N) throw Error(ErrorKind::Dimension, "apply_L_fd: point dimension mismatch");
    const Matrix az = a(z);
    const double u0 = u(z);
    auto shifted = [&](int i, double di, int j, double dj) {
        Point p = z;
        p.x[i] += di;
        if (j >= 0) p.x[j] += dj;
        return u(p);
    };
    auto estimate = [&](double k, double& magnitude) {
        double total = 0.0;
        magnitude = 0.0;
        for (int i = 0; i < spec.m; ++i) {
            for (int j = 0; j <= i; ++j) {
                double d = 0.0;
                if (i == j) {
                    d = (shifted(i, k, -1, 0) - 2.0 * u0 + shifted(i, -k, -1, 0)) / (k * k);
                } else {
                    d = (shifted(i, k, j, k) - shifted(i, k, j, -k) - shifted(i, -k, j, k) + shifted(i, -k, j, -k)) /
                        (4.0 * k * k);
                }
                const double term = (i == j ? az(i, i) : az(i, j) + az(j, i)) * d;
                total += term;
                magnitude += std::abs(term);
            }
        }
        const double y = (u(y_flow(spec, z, k)) - u(y_flow(spec, z, -k))) / (2.0 * k);
        magnitude += std::abs(y);
        return total + y;
    };
    double mag_coarse = 0.0, mag_fine = 0.0;
    const double coarse = estimate(h, mag_coarse);
    const double fine = estimate(0.5 * h, mag_fine);
    const double roundoff = 1e-13 * std::abs(u0) * std::max(1.0, max_abs(az)) / (h * h);
    if (std::abs(fine - coarse) > 1e-2 * std::max(mag_coarse, mag_fine) + roundoff)
        throw Error(ErrorKind::Accuracy, "apply_L_fd: refinement is inconsistent; u is not smooth at this scale");
    return (4.0 * fine - coarse) / 3.0;
}

// Representation formula ---------------------------------------------------------------

ConvolutionResult convolve_solution(const KernelContext& ctx, const ScalarFn& f, const SupportBox& box, const Point& z,
                                    const ConvolutionOptions& opt) {
    const int n = ctx.spec().N;
    check_box(box, n);
    if (z.N() != n) throw Error(ErrorKind::Dimension, "convolve_solution: point dimension mismatch");
    ConvolutionResult res;
    const double s_lo = std::max(0.0, z.t - box.t_hi);
    const double s_hi = z.t - box.t_lo;
    if (!(s_hi > 0.0)) return res;

    Point zeta = Point::origin(n);
    auto evaluate = [&](int sp, int vp, double& absolute) {
        double total = 0.0;
        absolute = 0.0;
        for_each_whitened(ctx, z, box, linear_nodes(s_lo, s_hi, sp, opt.order), vp, opt.order, 1e-6,
                          [&](const Whitened&, const std::vector<double>&, const std::vector<double>& y, double tau,
                              double w) {
                              for (int i = 0; i < n; ++i) zeta.x[i] = y[static_cast<size_t>(i)];
                              zeta.t = tau;
                              const double fv = f(zeta);
                              total += w * fv;
                              absolute += w * std::abs(fv);
                          });
        return -total;
    };
    int sp = opt.s_panels, vp = opt.v_panels;
    double abs_prev = 0.0, abs_next = 0.0;
    double prev = evaluate(sp, vp, abs_prev);
    for (int k = 0; k <= opt.max_doublings; ++k) {
        sp *= 2;
        vp *= 2;
        const double next = evaluate(sp, vp, abs_next);
        const double scale = std::max(std::abs(next), 1e-6 * abs_next);
        res.value = next;
        res.refinement_change = scale == 0.0 ? 0.0 : std::abs(next - prev) / scale;
        if (res.refinement_change <= opt.rel_tol) return res;
        prev = next;
    }
    throw Error(ErrorKind::Accuracy, "convolve_solution: grid doubling did not settle");
}

// Cut-off -----------------------------------------------------------------------

double cutoff_chi(double s, double R) {
    const double tau = (s - 0.75 * R) / (0.25 * R);
    if (tau <= 0.0) return 1.0;
    if (tau >= 1.0) return 0.0;
    return 1.0 - tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
}

double cutoff_eta(double R, const Point& z, const Exponents& exps) {
    if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "cutoff_eta: R must lie in (0, 1]");
    return cutoff_chi(knorm(z, exps), R);
}

Vector cutoff_eta_grad(double R, const Point& z, const Exponents& exps) {
    if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "cutoff_eta: R must lie in (0, 1]");
    const int n = z.N();
    Vector g = Vector::Zero(n);
    const double nz = knorm(z, exps);
    const double tau = (nz - 0.75 * R) / (0.25 * R);
    if (tau <= 0.0 || tau >= 1.0) return g;
    int arg = -1;
    double best = std::sqrt(std::abs(z.t));
    for (int i = 0; i < n; ++i) {
        const int a = exps.alpha[static_cast<size_t>(i)];
        const double root = std::pow(std::abs(z.x[i]), 1.0 / a);
        if (root > best) {
            best = root;
            arg = i;
        }
    }
    if (arg < 0) return g;
    const double dchi = -30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / (0.25 * R);
    const int a = exps.alpha[static_cast<size_t>(arg)];
    const double dn = std::pow(best, 1.0 - a) / a;
    g[arg] = dchi * dn * (z.x[arg] < 0.0 ? -1.0 : 1.0);
    return g;
}

CutoffReport cutoff_report(double R, const Exponents& exps, int samples, std::uint64_t seed) {
    if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "cutoff_report: R must lie in (0, 1]");
    const int n = exps.N();
    CutoffReport rep;
    rep.R = R;
    rep.grad_scaled.assign(static_cast<size_t>(n), 0.0);
    Rng rng(seed);
    for (int k = 0; k < samples; ++k) {
        const Point z = dilate(R, sample_unit_ball(exps, 1.0, rng), exps);
        for (int i = 0; i < n; ++i) {
            const double scale = std::pow(R, exps.alpha[static_cast<size_t>(i)]);
            const double h = 1e-6 * scale;
            Point p = z, q = z;
            p.x[i] += h;
            q.x[i] -= h;
            const double d = (cutoff_eta(R, p, exps) - cutoff_eta(R, q, exps)) / (2.0 * h);
            rep.grad_scaled[static_cast<size_t>(i)] = std::max(rep.grad_scaled[static_cast<size_t>(i)], std::abs(d) * scale);
        }
        const double h = 1e-6 * R * R;
        Point p = z, q = z;
        p.t += h;
        q.t -= h;
        const double d = (cutoff_eta(R, p, exps) - cutoff_eta(R, q, exps)) / (2.0 * h);
        rep.dt_scaled = std::max(rep.dt_scaled, std::abs(d) * R * R);
    }
    return rep;
}

// Interior estimates ------------------------------------------------------------------

std::vector<NamedJet> harmonic_family(const KernelContext& ctx, double R, int poles, std::uint64_t seed) {
    const OperatorSpec& spec = ctx.spec();
    const Exponents& exps = ctx.exps();
    std::vector<NamedJet> out;
    Rng rng(seed);
    for (int k = 0; k < poles; ++k) {
        Point p = Point::origin(spec.N);
        for (int i = 0; i < spec.N; ++i) p.x[i] = uniform(rng, -1.0, 1.0);
        p.t = uniform(rng, -2.5, -1.5);
        out.push_back({"pole" + std::to_string(k), kernel_translate(ctx, dilate(R, p, exps))});
    }
    out.push_back({"constant", constant(1.0, spec.N)});
    if (first_row_vanishes(spec)) {
        std::vector<int> e(static_cast<size_t>(spec.N), 0);
        e[0] = 1;
        out.push_back({"affine", monomial(e, 0)});
    }
    return out;
}

EstimateReport verify_apriori(const KernelContext& ctx, const std::vector<double>& R_list, const VerifyOptions& opt) {
    const OperatorSpec& spec = ctx.spec();
    const Exponents& exps = ctx.exps();
    for (double R : R_list)
        if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "verify_apriori: R must lie in (0, 1]");
    EstimateReport rep;
    rep.name = "apriori";
    rep.criterion = "ratios stable within factor " + std::to_string(opt.stable_factor) + " across R";
    rep.seed = opt.seed;
    rep.scales = R_list;

    std::vector<int> levels;
    for (int a : exps.alpha)
        if (std::find(levels.begin(), levels.end(), a) == levels.end()) levels.push_back(a);
    std::vector<std::string> keys;
    for (int a : levels) keys.push_back("grad_alpha" + std::to_string(a));
    keys.push_back("hess");
    keys.push_back("Y");

    Rng rng(opt.seed);
    const auto unit_half = unit_samples(exps, 0.5, opt.points, rng);
    const auto unit_full = unit_samples(exps, 1.0, opt.sup_points, rng);
    int total = 0;
    for (double R : R_list) {
        const auto half = dilated(unit_half, R, exps);
        auto full = dilated(unit_full, R, exps);
        full.insert(full.end(), half.begin(), half.end());
        const auto family = harmonic_family(ctx, R, opt.poles, opt.seed);
        std::map<std::string, EstimateRow> best;
        for (const auto& k : keys) best[k] = {k, R, 0.0, 0.0, 0.0};
        std::vector<std::map<std::string, EstimateRow>> per_member(family.size());
        parallel_for(family.size(), [&](size_t idx) {
            const auto& member = family[idx];
            double sup_u = 0.0;
            for (const auto& z : full) sup_u = std::max(sup_u, std::abs(member.jet(z).u));
            std::map<std::string, double> sup;
            for (const auto& z : half) {
                const Jet j = member.jet(z);
                for (int i = 0; i < spec.N; ++i) {
                    const int a = exps.alpha[static_cast<size_t>(i)];
                    auto& s = sup["grad_alpha" + std::to_string(a)];
                    s = std::max(s, std::abs(j.grad[i]) * std::pow(R, a));
                }
                sup["hess"] = std::max(sup["hess"], max_abs(j.hess.topLeftCorner(spec.m, spec.m)) * R * R);
                sup["Y"] = std::max(sup["Y"], std::abs(lie_from_jet(j, z, spec)) * R * R);
            }
            for (const auto& k : keys) {
                const double lhs = sup[k];
                per_member[idx][k] = {k, R, lhs, sup_u, lhs == 0.0 ? 0.0 : lhs / sup_u};
            }
        });
        for (const auto& pm : per_member)
            for (const auto& [k, row] : pm)
                if (row.ratio > best[k].ratio) best[k] = row;
        total += static_cast<int>(family.size() * (full.size() + half.size()));
        for (const auto& k : keys) {
            rep.rows.push_back(best[k]);
            rep.scaling[k].push_back(best[k].ratio);
        }
    }
    rep.samples = total;
    rep.pass = true;
    for (const auto& k : keys) {
        const auto& vals = rep.scaling[k];
        rep.constants[k] = *std::max_element(vals.begin(), vals.end());
        rep.pass = rep.pass && stable(vals, opt.stable_factor);
    }
    return rep;
}

EstimateReport verify_mean_value(const KernelContext& ctx, const std::vector<double>& R_list,
                                 const VerifyOptions& opt) {
    const OperatorSpec& spec = ctx.spec();
    const Exponents& exps = ctx.exps();
    for (double R : R_list)
        if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "verify_mean_value: R must lie in (0, 1]");
    EstimateReport rep;
    rep.name = "mean-value";
    rep.criterion = "ratio stable within factor " + std::to_string(opt.stable_factor) + " across R";
    rep.seed = opt.seed;
    rep.scales = R_list;

    Rng rng(opt.seed);
    const auto unit_half = unit_samples(exps, 0.5, opt.points, rng);
    const auto unit_full = unit_samples(exps, 1.0, opt.sup_points, rng);
    const Point center = Point::origin(spec.N);
    int total = 0;
    for (double R : R_list) {
        std::vector<Point> half;
        for (const auto& z : dilated(unit_half, R, exps))
            if (kdist(z, center, spec, exps) >= R / 100.0) half.push_back(z);
        auto full = dilated(unit_full, R, exps);
        full.insert(full.end(), half.begin(), half.end());
        const auto family = harmonic_family(ctx, R, opt.poles, opt.seed);
        std::vector<EstimateRow> per_member(family.size());
        parallel_for(family.size(), [&](size_t idx) {
            const auto& member = family[idx];
            double sup_u = 0.0;
            for (const auto& z : full) sup_u = std::max(sup_u, std::abs(member.jet(z).u));
            const double u0 = member.jet(center).u;
            EstimateRow row{member.name == "affine" ? "affine" : "C", R, 0.0, sup_u, 0.0};
            for (const auto& z : half) {
                const double d = kdist(z, center, spec, exps);
                const double lhs = std::abs(member.jet(z).u - u0) * R;
                const double ratio = lhs == 0.0 ? 0.0 : lhs / (d * sup_u);
                if (ratio > row.ratio) {
                    row.lhs = lhs;
                    row.rhs = d * sup_u;
                    row.ratio = ratio;
                }
            }
            per_member[idx] = row;
        });
        EstimateRow best{"C", R, 0.0, 0.0, 0.0};
        for (const auto& row : per_member) {
            if (row.quantity == "affine") rep.rows.push_back(row);
            if (row.ratio > best.ratio) {
                best = row;
                best.quantity = "C";
            }
        }
        rep.rows.push_back(best);
        rep.scaling["C"].push_back(best.ratio);
        total += static_cast<int>(family.size() * (full.size() + half.size()));
    }
    rep.samples = total;
    const auto& vals = rep.scaling["C"];
    rep.constants["C"] = *std::max_element(vals.begin(), vals.end());
    rep.pass = stable(vals, opt.stable_factor);
    return rep;
}

// Singular integrals ------------------------------------------------------------------

std::string to_string(SingularKind k) {
    switch (k) {
        case SingularKind::Const: return "const";
        case SingularKind::G1: return "g1";
        case SingularKind::G2: return "g2";
    }
    return "const";
}

SingularKind parse_singular_kind(const std::string& s) {
    if (s == "const") return SingularKind::Const;
    if (s == "g1") return SingularKind::G1;
    if (s == "g2") return SingularKind::G2;
    throw Error(ErrorKind::Usage, "unknown singular kind '" + s + "'");
}

Matrix singular_hessian(const KernelContext& ctx, SingularKind kind, double R, const Point& z,
                        const SingularOptions& opt, double* refinement_change) {
    if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "singular_hessian: R must lie in (0, 1]");
    if (z.N() != ctx.spec().N) throw Error(ErrorKind::Dimension, "singular_hessian: point dimension mismatch");
    const Density dens{kind, R, &ctx.exps()};
    int sp = opt.sigma_panels, vp = opt.v_panels;
    double magnitude = 0.0;
    Matrix prev = singular_hessian_at(ctx, dens, z, sp, vp, opt.order, magnitude);
    for (int k = 0; k < 2; ++k) {
        sp *= 2;
        vp *= 2;
        const Matrix next = singular_hessian_at(ctx, dens, z, sp, vp, opt.order, magnitude);
        // Entries that cancel to nearly zero are judged against the absolute integrand.
        const double scale = std::max(max_abs(next), 1e-2 * magnitude);
        const double change = scale == 0.0 ? 0.0 : max_abs(next - prev) / scale;
        if (refinement_change) *refinement_change = change;
        if (change <= opt.rel_tol) return next;
        prev = next;
    }
    throw Error(ErrorKind::Accuracy, "singular_hessian: quadrature did not settle");
}

EstimateReport verify_singular_bounds(const KernelContext& ctx, SingularKind kind, const std::vector<double>& R_list,
                                      const SingularOptions& opt) {
    const Exponents& exps = ctx.exps();
    if (R_list.size() < 2) throw Error(ErrorKind::Domain, "verify_singular_bounds: need at least two radii");
    for (double R : R_list)
        if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::Domain, "verify_singular_bounds: R must lie in (0, 1]");
    EstimateReport rep;
    rep.name = "singular-" + to_string(kind);
    const double expected = kind == SingularKind::Const ? 1.0 : (kind == SingularKind::G1 ? 0.5 : 0.25);
    rep.criterion = "dyadic ratios within factor 1.5 of " + std::to_string(expected);
    rep.seed = opt.seed;
    rep.scales = R_list;

    Rng rng(opt.seed);
    std::vector<Point> unit = {Point::origin(ctx.spec().N)};
    for (int k = 1; k < opt.points; ++k) unit.push_back(sample_unit_ball(exps, 0.5, rng));
    for (double R : R_list) {
        const auto pts = dilated(unit, R, exps);
        std::vector<double> vals(pts.size(), 0.0);
        parallel_for(pts.size(), [&](size_t i) { vals[i] = max_abs(singular_hessian(ctx, kind, R, pts[i], opt)); });
        const double sup = *std::max_element(vals.begin(), vals.end());
        rep.rows.push_back({"max_hess", R, sup, 0.0, 0.0});
        rep.scaling["max_hess"].push_back(sup);
    }
    rep.samples = static_cast<int>(unit.size() * R_list.size());
    rep.pass = true;
    const auto& m = rep.scaling["max_hess"];
    for (size_t k = 1; k < m.size(); ++k) {
        const double ratio = m[k - 1] > 0.0 ? m[k] / m[k - 1] : kInf;
        // Normalise to a dyadic step so that non-dyadic sweeps compare too.
        const double steps = std::log2(R_list[k - 1] / R_list[k]);
        const double per_step = std::pow(ratio, 1.0 / steps);
        rep.rows.push_back({"step_ratio", R_list[k], m[k], m[k - 1], per_step});
        rep.scaling["step_ratio"].push_back(per_step);
        const double q = per_step / expected;
        rep.pass = rep.pass && std::isfinite(q) && q <= 1.5 && q >= 1.0 / 1.5;
    }
    rep.constants["max_hess"] = *std::max_element(m.begin(), m.end());
    return rep;
}

// Schauder estimates --------------------------------------------------------------------

EstimateReport verify_schauder_const(const KernelContext& ctx, const ManufacturedProblem& problem,
                                     const VerifyOptions& opt) {
    if (problem.varcoeff && problem.varcoeff->name != "const")
        throw Error(ErrorKind::Domain, "verify_schauder_const: problem has variable coefficients");
    return schauder_report(ctx, problem, opt, nullptr, "schauder-const");
}

EstimateReport verify_schauder_var(const KernelContext& ctx, const ManufacturedProblem& problem,
                                   const VerifyOptions& opt) {
    if (!problem.varcoeff) throw Error(ErrorKind::Domain, "verify_schauder_var: problem has no coefficient field");
    const auto& vc = *problem.varcoeff;
    const Exponents& exps = ctx.exps();
    Rng rng(opt.seed + 99);
    for (int k = 0; k < opt.sup_points; ++k) {
        const Matrix a = vc.a(sample_unit_ball(exps, 1.0, rng));
        Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        if (!(es.eigenvalues().minCoeff() > 0.0))
            throw Error(ErrorKind::Ellipticity, "verify_schauder_var: coefficients are not elliptic at a sample");
    }
    auto rep = schauder_report(ctx, problem, opt, &vc.omega_a, "schauder-var");
    rep.constants["omega_a_max"] = vc.omega_a.omega.back();
    return rep;
}

// Invariance --------------------------------------------------------------------------

EstimateReport verify_invariance(const KernelContext& ctx, const InvarianceOptions& opt) {
    const OperatorSpec& spec = ctx.spec();
    const Exponents& exps = ctx.exps();
    if (opt.dilation && !is_dilation_invariant(spec))
        throw Error(ErrorKind::Applicability, "dilation identity requires B = B_0");
    EstimateReport rep;
    rep.name = "invariance";
    rep.criterion = "identities hold to " + std::to_string(opt.tol);
    rep.seed = opt.seed;
    rep.samples = opt.samples;
    Rng rng(opt.seed);
    double left = 0.0, dil = 0.0;
    for (int k = 0; k < opt.samples; ++k) {
        BumpParams b;
        b.center = Vector(spec.N);
        b.sigma = Vector(spec.N);
        for (int i = 0; i < spec.N; ++i) {
            b.center[i] = uniform(rng, -0.5, 0.5);
            b.sigma[i] = uniform(rng, 0.5, 1.0);
        }
        b.center_t = uniform(rng, -0.5, 0.5);
        b.sigma_t = uniform(rng, 0.5, 1.0);
        const JetFn jet = bump(b);
        const ScalarFn u = [jet](const Point& p) { return jet(p).u; };
        const Point z = sample_unit_ball(exps, 1.0, rng);
        const Point zeta = sample_unit_ball(exps, 1.0, rng);
        const ScalarFn shifted = [&](const Point& p) { return u(compose(zeta, p, spec)); };
        const double lhs = apply_L_fd(spec, shifted, z);
        const double rhs = apply_L_fd(spec, u, compose(zeta, z, spec));
        const double e = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
        left = std::max(left, e);
        rep.rows.push_back({"left", 0.0, lhs, rhs, e});
        if (opt.dilation) {
            const double r = uniform(rng, 0.25, 1.0);
            const ScalarFn scaled = [&](const Point& p) { return u(dilate(r, p, exps)); };
            const double l2 = apply_L_fd(spec, scaled, z);
            const double r2 = r * r * apply_L_fd(spec, u, dilate(r, z, exps));
            const double e2 = std::abs(l2 - r2) / std::max(1.0, std::abs(r2));
            dil = std::max(dil, e2);
            rep.rows.push_back({"dilation", r, l2, r2, e2});
        }
    }
    rep.constants["left_error"] = left;
    if (opt.dilation) rep.constants["dilation_error"] = dil;
    rep.pass = left <= opt.tol && dil <= opt.tol;
    return rep;
}

}  // namespace kolmo
