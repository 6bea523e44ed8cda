#include "kolmo/kernel.hpp"

#include <cmath>
#include <mutex>
#include <numbers>

#include "kolmo/error.hpp"
#include "kolmo/parallel.hpp"

namespace kolmo {

namespace {

constexpr double kQuantum = 1e12;
constexpr size_t kCacheLimit = 200000;

void require_support(const Point& z, const Point& zeta, const char* what) {
    if (!(z.t - zeta.t > 0.0)) throw Error(ErrorKind::Support, std::string(what) + ": requires t > tau");
}

struct Centered {
    std::shared_ptr<const KernelSlice> slice;
    Vector w;
    Vector cw;  // Cinv w
    double value = 0.0;
};

Centered center(const KernelContext& ctx, const Point& z, const Point& zeta) {
    Centered c;
    c.slice = ctx.slice(z.t - zeta.t);
    c.w = z.x - c.slice->E * zeta.x;
    c.cw = c.slice->Cinv * c.w;
    c.value = c.slice->prefactor * std::exp(-0.25 * c.w.dot(c.cw));
    return c;
}

}  // namespace

KernelContext::KernelContext(OperatorSpec spec, int panels)
    : spec_(std::move(spec)), exps_(validate_structure(spec_)), panels_(panels), trace_B_(spec_.B.trace()),
      A_tilde_(embed_A(spec_)) {
    if (panels_ < 1) throw Error(ErrorKind::Domain, "KernelContext: panels must be positive");
}

Covariance KernelContext::covariance(double t) const {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Domain, "covariance: t must be positive");
    Covariance cov;
    cov.t = t;
    auto integrand = [&](double s) {
        const Matrix e = E_of(spec_.B, s);
        Matrix v = e * A_tilde_ * e.transpose();
        return Matrix(0.5 * (v + v.transpose()));
    };
    // Large t * |B| may need more panels than the default; refine twice before giving up.
    for (int attempt = 0;; ++attempt) {
        try {
            cov.C = integrate_matrix(integrand, t, panels_ << (2 * attempt));
            break;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Accuracy || attempt == 2) throw;
        }
    }
    Eigen::LLT<Matrix> llt(cov.C);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        const Vector d = Matrix(llt.matrixL()).diagonal();
        ok = d.minCoeff() > 0.0 && std::isfinite(d.minCoeff());
        cov.logdet = 2.0 * d.array().log().sum();
    }
    if (ok) {
        const SpdReport rep = spd_min_eigen(cov.C, 0.0);
        ok = rep.min_eigenvalue > 1e-15 * std::max(1e-300, cov.C.cwiseAbs().maxCoeff());
    }
    if (!ok) {
        throw Error(ErrorKind::Hypoellipticity, "C(" + std::to_string(t) + ") is numerically singular");
    }
    cov.Cinv = llt.solve(Matrix::Identity(spec_.N, spec_.N));
    cov.Cinv = 0.5 * (cov.Cinv + cov.Cinv.transpose());
    return cov;
}

std::shared_ptr<const KernelSlice> KernelContext::build_slice(double s) const {
    const Covariance cov = covariance(s);
    auto sl = std::make_shared<KernelSlice>();
    sl->s = s;
    sl->E = E_of(spec_.B, s);
    sl->C = cov.C;
    sl->Cinv = cov.Cinv;
    sl->Cprime = sl->E * A_tilde_ * sl->E.transpose();
    sl->Cprime = 0.5 * (sl->Cprime + sl->Cprime.transpose());
    sl->L = Eigen::LLT<Matrix>(2.0 * cov.C).matrixL();
    sl->logdet = cov.logdet;
    sl->prefactor = std::pow(4.0 * std::numbers::pi, -0.5 * spec_.N) * std::exp(-0.5 * cov.logdet - s * trace_B_);
    return sl;
}

std::shared_ptr<const KernelSlice> KernelContext::slice(double s) const {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::Domain, "slice: time gap must be positive");
    const long long key = std::llround(s * kQuantum);
    {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    auto built = build_slice(s);
    std::unique_lock lock(mutex_);
    if (cache_.size() >= kCacheLimit) cache_.clear();
    auto [it, inserted] = cache_.emplace(key, built);
    return it->second;
}

size_t KernelContext::cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
}

GammaValue gamma_value(const KernelContext& ctx, const Point& z, const Point& zeta) {
    const double s = z.t - zeta.t;
    GammaValue g;
    if (s < 0.0) return g;
    if (s == 0.0) {
        g.pole = (z.x - zeta.x).cwiseAbs().maxCoeff() == 0.0;
        return g;
    }
    const auto sl = ctx.slice(s);
    const Vector w = z.x - sl->E * zeta.x;
    g.value = sl->prefactor * std::exp(-0.25 * w.dot(sl->Cinv * w));
    return g;
}

double gamma(const KernelContext& ctx, const Point& z, const Point& zeta) { return gamma_value(ctx, z, zeta).value; }

Vector gamma_grad(const KernelContext& ctx, const Point& z, const Point& zeta) {
    require_support(z, zeta, "gamma_grad");
    const Centered c = center(ctx, z, zeta);
    return -0.5 * c.value * c.cw;
}

Matrix gamma_hess(const KernelContext& ctx, const Point& z, const Point& zeta) {
    require_support(z, zeta, "gamma_hess");
    const Centered c = center(ctx, z, zeta);
    return c.value * (0.25 * c.cw * c.cw.transpose() - 0.5 * c.slice->Cinv);
}

Matrix gamma_hess_m(const KernelContext& ctx, const Point& z, const Point& zeta) {
    const int m = ctx.spec().m;
    return gamma_hess(ctx, z, zeta).topLeftCorner(m, m);
}

double gamma_Y(const KernelContext& ctx, const Point& z, const Point& zeta) {
    require_support(z, zeta, "gamma_Y");
    const Centered c = center(ctx, z, zeta);
    const KernelSlice& sl = *c.slice;
    const double drift = -0.5 * c.cw.dot(ctx.spec().B * c.w);
    const double trace = 0.5 * (sl.Cinv * sl.Cprime).trace();
    const double quad = -0.25 * c.cw.dot(sl.Cprime * c.cw);
    return c.value * (drift + trace + quad + ctx.trace_B());
}

double check_kernel_pde(const KernelContext& ctx, const Point& z, const Point& zeta) {
    const int m = ctx.spec().m;
    const Matrix h = gamma_hess(ctx, z, zeta);
    const double diffusion = (ctx.spec().A.array() * h.topLeftCorner(m, m).array()).sum();
    return diffusion + gamma_Y(ctx, z, zeta);
}

double check_homogeneity(const KernelContext& ctx, const Point& z, double r) {
    if (!is_dilation_invariant(ctx.spec())) {
        throw Error(ErrorKind::Applicability, "check_homogeneity: B differs from B_0, Gamma is not homogeneous");
    }
    if (!(z.t > 0.0)) throw Error(ErrorKind::Domain, "check_homogeneity: requires t > 0");
    const Point o = Point::origin(ctx.spec().N);
    const double base = gamma(ctx, z, o);
    if (!(base > 0.0)) throw Error(ErrorKind::Domain, "check_homogeneity: Gamma underflows at z");
    return gamma(ctx, dilate(r, z, ctx.exps()), o) * std::pow(r, ctx.exps().Q) / base;
}

namespace {

std::vector<QuadratureRule> gaussian_rules(int dim, int panels, int order) {
    constexpr double kHalfWidth = 8.5;
    return std::vector<QuadratureRule>(static_cast<size_t>(dim), composite_rule(-kHalfWidth, kHalfWidth, panels, order));
}

}  // namespace

MassReport kernel_mass(const KernelContext& ctx, double t, int panels, int order) {
    if (!(t > 0.0)) throw Error(ErrorKind::Domain, "kernel_mass: t must be positive");
    const auto sl = ctx.slice(t);
    const int n = ctx.spec().N;
    const Point o = Point::origin(n);
    const double jac = sl->L.diagonal().prod();
    auto run = [&](int p) {
        double sum = 0.0;
        for_each_tensor_node(gaussian_rules(n, p, order), [&](const Vector& v, double w) {
            sum += w * gamma(ctx, Point(sl->L * v, t), o);
        });
        return sum * jac;
    };
    MassReport rep;
    const double coarse = run(panels);
    rep.mass = run(2 * panels);
    rep.refinement_change = std::abs(rep.mass - coarse);
    rep.expected = std::exp(-t * ctx.trace_B());
    if (rep.refinement_change > 1e-8 * std::max(1.0, rep.mass)) {
        throw Error(ErrorKind::Accuracy, "kernel_mass: refinement changed the mass by " +
                                             std::to_string(rep.refinement_change));
    }
    return rep;
}

ChapmanReport chapman_kolmogorov(const KernelContext& ctx, const Point& z, double s, const Point& zeta, int panels,
                                 int order) {
    if (!(zeta.t < s && s < z.t)) throw Error(ErrorKind::Domain, "chapman_kolmogorov: requires tau < s < t");
    const auto s1 = ctx.slice(z.t - s);
    const auto s2 = ctx.slice(s - zeta.t);
    const Vector m2 = s2->E * zeta.x;
    const Matrix p = 0.5 * (s1->E.transpose() * s1->Cinv * s1->E + s2->Cinv);
    const Vector b = 0.5 * (s1->E.transpose() * s1->Cinv * z.x + s2->Cinv * m2);
    Eigen::LLT<Matrix> llt(0.5 * (p + p.transpose()));
    if (llt.info() != Eigen::Success) throw Error(ErrorKind::Hypoellipticity, "chapman_kolmogorov: singular precision");
    const Vector mu = llt.solve(b);
    const Matrix lt = llt.matrixU();  // L^T
    const Matrix lt_inv = lt.triangularView<Eigen::Upper>().solve(Matrix::Identity(p.rows(), p.cols()));
    const double jac = 1.0 / Matrix(llt.matrixL()).diagonal().prod();
    const int n = ctx.spec().N;

    auto run = [&](int pn) {
        double sum = 0.0;
        for_each_tensor_node(gaussian_rules(n, pn, order), [&](const Vector& v, double w) {
            const Point y(mu + lt_inv * v, s);
            sum += w * gamma(ctx, z, y) * gamma(ctx, y, zeta);
        });
        return sum * jac;
    };
    ChapmanReport rep;
    const double coarse = run(panels);
    rep.lhs = run(2 * panels);
    rep.refinement_change = std::abs(rep.lhs - coarse);
    rep.rhs = gamma(ctx, z, zeta);
    rep.rel_error = std::abs(rep.lhs - rep.rhs) / std::max(std::abs(rep.rhs), 1e-300);
    return rep;
}

BoundsReport check_bounds(const KernelContext& ctx, int samples, double R0, std::uint64_t seed,
                          const std::vector<double>& annulus_R) {
    if (samples < 1) throw Error(ErrorKind::Domain, "check_bounds: samples must be positive");
    if (!(R0 > 0.0)) throw Error(ErrorKind::Domain, "check_bounds: R0 must be positive");
    const auto& spec = ctx.spec();
    const auto& exps = ctx.exps();
    const int n = spec.N;
    const int m = spec.m;
    const int q = exps.Q;

    struct Cell {
        double g = 0, h = 0, y = 0;
        std::vector<double> grad;
        bool used = false;
    };
    std::vector<Cell> cells(static_cast<size_t>(samples));
    Rng rng(seed);
    std::vector<std::pair<Point, Point>> pairs;
    pairs.reserve(static_cast<size_t>(samples));
    for (int k = 0; k < samples; ++k) {
        Point a = sample_unit_ball(exps, R0, rng);
        Point b = sample_unit_ball(exps, R0, rng);
        if (a.t < b.t) std::swap(a, b);
        pairs.emplace_back(std::move(a), std::move(b));
    }
    parallel_for(pairs.size(), [&](size_t k) {
        const auto& [z, zeta] = pairs[k];
        Cell& c = cells[k];
        if (!(z.t > zeta.t)) return;
        const double d = kdist(z, zeta, spec, exps);
        if (!(d > 0.0)) return;
        c.used = true;
        c.g = gamma(ctx, z, zeta) * std::pow(d, q);
        const Vector gr = gamma_grad(ctx, z, zeta);
        c.grad.resize(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j) c.grad[static_cast<size_t>(j)] = std::abs(gr[j]) * std::pow(d, q + exps.alpha[static_cast<size_t>(j)]);
        c.h = gamma_hess(ctx, z, zeta).topLeftCorner(m, m).cwiseAbs().maxCoeff() * std::pow(d, q + 2);
        c.y = std::abs(gamma_Y(ctx, z, zeta)) * std::pow(d, q + 2);
    });

    BoundsReport rep;
    rep.c_grad.assign(static_cast<size_t>(n), 0.0);
    for (const auto& c : cells) {
        if (!c.used) continue;
        ++rep.samples;
        rep.c_gamma = std::max(rep.c_gamma, c.g);
        rep.c_hess = std::max(rep.c_hess, c.h);
        rep.c_Y = std::max(rep.c_Y, c.y);
        for (int j = 0; j < n; ++j) rep.c_grad[static_cast<size_t>(j)] = std::max(rep.c_grad[static_cast<size_t>(j)], c.grad[static_cast<size_t>(j)]);
    }

    // Annulus configuration, sampled once at unit scale and dilated.
    Rng arng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::pair<Point, Point>> unit_pairs;
    while (static_cast<int>(unit_pairs.size()) < samples) {
        Point z = sample_unit_ball(exps, 0.5, arng);
        Point zeta = sample_unit_ball(exps, 1.0, arng);
        if (knorm(zeta, exps) < 0.75) continue;
        unit_pairs.emplace_back(std::move(z), std::move(zeta));
    }
    for (double R : annulus_R) {
        std::vector<double> vals(unit_pairs.size(), 0.0);
        parallel_for(unit_pairs.size(), [&](size_t k) {
            const Point z = dilate(R, unit_pairs[k].first, exps);
            const Point zeta = dilate(R, unit_pairs[k].second, exps);
            vals[k] = gamma(ctx, z, zeta) * std::pow(R, q);
        });
        double sup = 0.0;
        for (double v : vals) sup = std::max(sup, v);
        rep.annulus_R.push_back(R);
        rep.annulus_sup.push_back(sup);
    }
    return rep;
}

}  // namespace kolmo
