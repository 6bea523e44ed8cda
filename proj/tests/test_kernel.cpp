#include <doctest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "kolmo/error.hpp"
#include "kolmo/kernel.hpp"
#include "kolmo/spec_io.hpp"
#include "support.hpp"

using namespace kolmo;
using kolmo::testing::kolmogorov_C;
using kolmo::testing::random_spec;

namespace {

Point P(double x, double y, double t) {
    Vector v(2);
    v << x, y;
    return {v, t};
}

Point P1(double x, double t) {
    Vector v(1);
    v << x;
    return {v, t};
}

// Fourth-order central difference.
double d1(const std::function<double(double)>& f, double x, double h) {
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h);
}

// FD steps follow the Gaussian scale sqrt(2 C_ii(t - tau)) of each coordinate.
double step(const KernelContext& ctx, const Point& z, const Point& zeta, int i, double rel) {
    return rel * std::sqrt(2.0 * ctx.slice(z.t - zeta.t)->C(i, i));
}

Vector fd_grad(const KernelContext& ctx, const Point& z, const Point& zeta, double rel) {
    Vector g(z.N());
    for (int i = 0; i < z.N(); ++i) {
        const double h = step(ctx, z, zeta, i, rel);
        g[i] = d1(
            [&](double v) {
                Point p = z;
                p.x[i] = v;
                return gamma(ctx, p, zeta);
            },
            z.x[i], h);
    }
    return g;
}

Matrix fd_hess(const KernelContext& ctx, const Point& z, const Point& zeta, double rel) {
    const int n = z.N();
    Matrix H(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double h = step(ctx, z, zeta, j, rel);
            H(i, j) = d1(
                [&](double v) {
                    Point p = z;
                    p.x[j] = v;
                    return gamma_grad(ctx, p, zeta)[i];
                },
                z.x[j], h);
        }
    }
    return H;
}

// Flow difference along (exp(sB)x, t - s), fourth order.
double fd_Y(const KernelContext& ctx, const Point& z, const Point& zeta, double rel) {
    const double h = rel * (z.t - zeta.t);
    return d1(
        [&](double s) { return gamma(ctx, Point(mat_exp(s * ctx.spec().B) * z.x, z.t - s), zeta); }, 0.0, h);
}

struct Pair {
    Point z, zeta;
};

// Pairs whose whitened offset is moderate, so Gamma is far from underflow.
std::vector<Pair> random_pairs(const KernelContext& ctx, int count, std::uint64_t seed, double lo = 0.1,
                               double hi = 2.0) {
    Rng rng(seed);
    const int n = ctx.spec().N;
    std::vector<Pair> out;
    for (int k = 0; k < count; ++k) {
        const Point zeta = kolmo::testing::random_point(n, rng);
        const double s = uniform(rng, lo, hi);
        const auto sl = ctx.slice(s);
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(rng, -3.0, 3.0);
        out.push_back({Point(sl->E * zeta.x + sl->L * v, zeta.t + s), zeta});
    }
    return out;
}

}  // namespace

TEST_CASE("covariance closed forms") {
    KernelContext k(named_spec("kolmogorov"));
    for (double t : {0.05, 0.5, 1.0, 3.0}) {
        const Covariance c = k.covariance(t);
        CHECK((c.C - kolmogorov_C(t)).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, t * t * t));
        CHECK(std::exp(c.logdet) == doctest::Approx(std::pow(t, 4) / 12.0).epsilon(1e-10));
        CHECK((c.Cinv * c.C - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-10);
    }
    Matrix cinv1(2, 2);
    cinv1 << 4, -6, -6, 12;
    CHECK((k.covariance(1.0).Cinv - cinv1).cwiseAbs().maxCoeff() <= 1e-10);

    KernelContext heat(make_spec(Matrix::Identity(3, 3), Matrix::Zero(3, 3), {3}));
    CHECK((heat.covariance(0.7).C - 0.7 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(k.covariance(0.0), Error);
    OperatorSpec degenerate = make_spec(Matrix::Identity(1, 1), Matrix::Zero(2, 2), {2});
    degenerate.blocks.sizes = {1, 1};
    // Bypass validation to reach the covariance singularity check.
    degenerate.B(1, 0) = 1e-300;
    try {
        KernelContext bad(degenerate);
        bad.covariance(1.0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK((e.kind() == ErrorKind::Hypoellipticity || e.kind() == ErrorKind::Structure));
    }
}

TEST_CASE("gamma values") {
    KernelContext k(named_spec("kolmogorov"));
    const Point o = P(0, 0, 0);
    CHECK(gamma(k, P(0, 0, 1), o) == doctest::Approx(std::sqrt(3.0) / (2.0 * std::numbers::pi)).epsilon(1e-12));
    CHECK(std::abs(gamma(k, P(0, 0, 1), o) - std::sqrt(3.0) / (2.0 * std::numbers::pi)) <= 1e-10);
    CHECK(gamma(k, P(0.2, 0.1, -1), o) == 0.0);
    const GammaValue pole = gamma_value(k, o, o);
    CHECK(pole.pole);
    CHECK(pole.value == 0.0);
    CHECK_FALSE(gamma_value(k, P(1, 0, 0), o).pole);

    KernelContext heat(named_spec("heat1d"));
    for (double x : {-1.3, 0.0, 0.4}) {
        for (double t : {0.1, 1.0, 2.5}) {
            const double classical = std::exp(-x * x / (4 * t)) / std::sqrt(4 * std::numbers::pi * t);
            CHECK(gamma(heat, P1(x, t), P1(0, 0)) == doctest::Approx(classical).epsilon(1e-12));
        }
    }
}

TEST_CASE("gamma derivatives") {
    KernelContext k(named_spec("kolmogorov"));
    const Point o = P(0, 0, 0);
    CHECK(gamma_grad(k, P(0, 0, 1), o).norm() == 0.0);
    const Point z = P(1, 0, 1);
    const double g = gamma(k, z, o);
    const Vector grad = gamma_grad(k, z, o);
    CHECK(grad[0] == doctest::Approx(-2.0 * g).epsilon(1e-10));
    CHECK(grad[1] == doctest::Approx(3.0 * g).epsilon(1e-10));
    CHECK_THROWS_AS(gamma_grad(k, o, P(0, 0, 1)), Error);
    try {
        gamma_Y(k, o, o);
        FAIL("expected support error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Support);
    }

    KernelContext heat(named_spec("heat1d"));
    for (double t : {0.2, 1.0}) {
        const double h = gamma_hess_m(heat, P1(0, t), P1(0, 0))(0, 0);
        CHECK(h == doctest::Approx(-gamma(heat, P1(0, t), P1(0, 0)) / (2 * t)).epsilon(1e-12));
    }

    for (const char* name : {"kolmogorov", "ex42", "kappa2"}) {
        KernelContext ctx(named_spec(name));
        for (const auto& [zz, zeta] : random_pairs(ctx, 100, 17)) {
            const Vector an = gamma_grad(ctx, zz, zeta);
            const Vector fd = fd_grad(ctx, zz, zeta, 1e-3);
            const double gv = gamma(ctx, zz, zeta);
            CHECK((an - fd).norm() <= 1e-6 * an.norm() + 1e-12 * gv);

            const Matrix ha = gamma_hess(ctx, zz, zeta);
            const Matrix hf = fd_hess(ctx, zz, zeta, 1e-3);
            CHECK((ha - hf).norm() <= 1e-5 * ha.norm() + 1e-12 * gv);

            const double ya = gamma_Y(ctx, zz, zeta);
            const double yf = fd_Y(ctx, zz, zeta, 1e-3);
            CHECK(std::abs(ya - yf) <= 1e-5 * (std::abs(ya) + gv));
        }
    }
}

TEST_CASE("Gamma solves the operator") {
    KernelContext k(named_spec("kolmogorov"));
    for (const auto& [z, zeta] : random_pairs(k, 50, 23)) {
        CHECK(std::abs(check_kernel_pde(k, z, zeta)) <= 1e-6 * gamma(k, z, zeta));
    }
    KernelContext heat(named_spec("heat1d"));
    for (const auto& [z, zeta] : random_pairs(heat, 50, 29)) {
        CHECK(std::abs(check_kernel_pde(heat, z, zeta)) <= 1e-8 * gamma(heat, z, zeta));
    }
    // Far tail: knorm of the relative point is 5.
    const Point far = P(5.0, 0.0, 1.0);
    const double g = gamma(k, far, P(0, 0, 0));
    CHECK(g > 0.0);
    CHECK(std::abs(check_kernel_pde(k, far, P(0, 0, 0))) <= 1e-5 * g);

    Rng rng(31);
    for (int s = 0; s < 10; ++s) {
        KernelContext ctx(random_spec(rng, s % 2 == 0));
        for (const auto& [z, zeta] : random_pairs(ctx, 20, 37 + s)) {
            CHECK(std::abs(check_kernel_pde(ctx, z, zeta)) <= 1e-6 * gamma(ctx, z, zeta) + 1e-300);
        }
    }
}

TEST_CASE("Y Gamma at the Gaussian center") {
    // d/dt of the prefactor t^{-Q/2}: Y Gamma = -d_t Gamma = (Q / 2t) Gamma.
    for (const char* name : {"kolmogorov", "kappa2", "heat1d"}) {
        KernelContext ctx(named_spec(name));
        const int n = ctx.spec().N;
        for (double t : {0.3, 1.0, 1.7}) {
            const Point z(Vector::Zero(n), t);
            const double g = gamma(ctx, z, Point::origin(n));
            CHECK(gamma_Y(ctx, z, Point::origin(n)) == doctest::Approx(ctx.exps().Q / (2.0 * t) * g).epsilon(1e-9));
        }
    }
}

TEST_CASE("homogeneity") {
    KernelContext k(named_spec("kolmogorov"));
    CHECK(std::abs(check_homogeneity(k, P(1, 1, 1), 0.5) - 1.0) <= 1e-10);
    CHECK(check_homogeneity(k, P(1, 1, 1), 1.0) == 1.0);
    KernelContext heat(named_spec("heat1d"));
    for (double r : {0.1, 0.5, 3.0}) CHECK(std::abs(check_homogeneity(heat, P1(0.7, 0.4), r) - 1.0) <= 1e-12);
    KernelContext k2(named_spec("kappa2"));
    Vector x(4);
    x << 0.2, -0.1, 0.3, 0.05;
    CHECK(std::abs(check_homogeneity(k2, Point(x, 0.8), 0.25) - 1.0) <= 1e-10);
    try {
        KernelContext ex42(named_spec("ex42"));
        check_homogeneity(ex42, P(1, 1, 1), 0.5);
        FAIL("expected applicability error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Applicability);
    }
}

TEST_CASE("kernel mass") {
    KernelContext k(named_spec("kolmogorov"));
    CHECK(std::abs(kernel_mass(k, 1.0).mass - 1.0) <= 1e-6);
    KernelContext ex42(named_spec("ex42"));
    const auto rep = kernel_mass(ex42, 1.0);
    CHECK(std::abs(rep.mass - std::exp(-1.0)) <= 1e-5);
    CHECK(rep.expected == doctest::Approx(std::exp(-1.0)));
    KernelContext heat(named_spec("heat1d"));
    CHECK(std::abs(kernel_mass(heat, 0.3).mass - 1.0) <= 1e-6);
}

TEST_CASE("left invariance of Gamma") {
    for (const char* name : {"kolmogorov", "ex42"}) {
        KernelContext ctx(named_spec(name));
        Rng rng(41);
        for (const auto& [z, zeta] : random_pairs(ctx, 100, 43)) {
            const Point w = kolmo::testing::random_point(2, rng);
            const double a = gamma(ctx, z, zeta);
            const double b = gamma(ctx, compose(w, z, ctx.spec()), compose(w, zeta, ctx.spec()));
            CHECK(std::abs(a - b) <= 1e-11 * std::max(1.0, a));
        }
    }
}

TEST_CASE("Chapman-Kolmogorov") {
    KernelContext k(named_spec("kolmogorov"));
    const auto rep = chapman_kolmogorov(k, P(0.3, -0.2, 1.0), 0.4, P(-0.1, 0.1, 0.0));
    CHECK(rep.rel_error <= 1e-4);
    KernelContext ex42(named_spec("ex42"));
    CHECK(chapman_kolmogorov(ex42, P(0.5, 0.2, 0.9), 0.3, P(0.0, -0.3, -0.2)).rel_error <= 1e-4);
    CHECK_THROWS_AS(chapman_kolmogorov(k, P(0, 0, 1), 2.0, P(0, 0, 0)), Error);
}

TEST_CASE("kernel bounds") {
    KernelContext k(named_spec("kolmogorov"));
    const auto a = check_bounds(k, 10000, 1.0, 1);
    const auto b = check_bounds(k, 10000, 1.0, 2);
    CHECK(std::isfinite(a.c_gamma));
    CHECK(a.c_gamma > 0.0);
    CHECK(a.c_gamma <= 2.0 * b.c_gamma);
    CHECK(b.c_gamma <= 2.0 * a.c_gamma);
    CHECK(std::isfinite(a.c_grad[1]));
    CHECK(a.c_grad[1] > 0.0);
    CHECK(std::isfinite(a.c_hess));
    CHECK(std::isfinite(a.c_Y));
    REQUIRE(a.annulus_sup.size() == 3);
    const double lo = *std::min_element(a.annulus_sup.begin(), a.annulus_sup.end());
    const double hi = *std::max_element(a.annulus_sup.begin(), a.annulus_sup.end());
    CHECK(lo > 0.0);
    CHECK(hi <= 2.0 * lo);
}

TEST_CASE("slice cache under concurrent access") {
    KernelContext k(named_spec("ex42"));
    std::vector<std::thread> pool;
    std::vector<double> results(8, 0.0);
    for (int w = 0; w < 8; ++w) {
        pool.emplace_back([&, w] {
            double acc = 0.0;
            for (int i = 1; i <= 200; ++i) acc += k.slice(0.01 * i)->prefactor;
            results[static_cast<size_t>(w)] = acc;
        });
    }
    for (auto& t : pool) t.join();
    for (double r : results) CHECK(r == results[0]);
    CHECK(k.cache_size() == 200);
    const auto fresh = KernelContext(named_spec("ex42")).slice(0.37);
    CHECK(std::abs(k.slice(0.37)->prefactor - fresh->prefactor) <= 1e-12 * fresh->prefactor);
}
