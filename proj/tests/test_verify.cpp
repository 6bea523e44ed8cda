#include <doctest.h>

#include <cmath>

#include "kolmo/verify.hpp"
#include "support.hpp"

using namespace kolmo;
using kolmo::testing::random_point;
using kolmo::testing::random_spec;

namespace {

const OperatorSpec& kolmogorov() {
    static const OperatorSpec s = named_spec("kolmogorov");
    return s;
}

const KernelContext& kolmogorov_ctx() {
    static const KernelContext ctx(kolmogorov());
    return ctx;
}

Point pt(std::initializer_list<double> x, double t) {
    Vector v(static_cast<Eigen::Index>(x.size()));
    Eigen::Index i = 0;
    for (double c : x) v[i++] = c;
    return {v, t};
}

/// 1-D heat source -exp(-y^2 / (2 sigma^2)) switched on for tau in [0, T].
struct HeatSource {
    double sigma = 0.4;
    double T = 0.5;

    double f(const Point& z) const {
        if (z.t < 0.0 || z.t > T) return 0.0;
        return -std::exp(-z.x[0] * z.x[0] / (2.0 * sigma * sigma));
    }

    /// Duhamel: int over active s of the source smoothed by the heat kernel of variance 2s.
    double solution(double x, double t) const {
        const double a = std::max(0.0, t - T);
        if (!(t > 0.0)) return 0.0;
        return integrate(
            [&](double s) {
                const double v = sigma * sigma + 2.0 * s;
                return sigma / std::sqrt(v) * std::exp(-x * x / (2.0 * v));
            },
            a, t, 64, 12);
    }
};

}  // namespace

TEST_CASE("manufactured problems") {
    const auto one = manufacture("one", kolmogorov());
    const auto zero = manufacture("zero", kolmogorov());
    Rng rng(3);
    for (int k = 0; k < 20; ++k) {
        const Point z = random_point(2, rng);
        CHECK(one.f(z) == 0.0);
        CHECK(zero.f(z) == 0.0);
        CHECK(one.u.u(z) == 1.0);
    }
    for (const char* fam : {"gauss", "gauss2", "polybump"}) {
        const auto p = manufacture(fam, kolmogorov());
        INFO(fam);
        CHECK(p.fd_mismatch < 1e-8);
        CHECK(validate_manufactured(p) == p.fd_mismatch);
    }
    auto broken = manufacture("gauss", kolmogorov());
    const ScalarFn good = broken.f;
    broken.f = [good](const Point& z) { return good(z) + 1e-3 * z.x[0]; };
    CHECK_THROWS_AS(validate_manufactured(broken), Error);
    try {
        validate_manufactured(broken);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Manufacture);
    }
    CHECK_THROWS_AS(manufacture("nope", kolmogorov()), Error);
}

TEST_CASE("manufactured problems on random specs") {
    Rng rng(21);
    for (int k = 0; k < 10; ++k) {
        const auto spec = random_spec(rng, k % 2 == 0, 2);
        INFO("spec " << k << " N " << spec.N);
        const auto p = manufacture(k % 3 == 0 ? "polybump" : "gauss", spec);
        CHECK(p.fd_mismatch < 1e-6);
    }
}

TEST_CASE("variable coefficients") {
    const auto sin = make_varcoeff("sin", kolmogorov());
    const auto sin2 = make_varcoeff("sin2", kolmogorov());
    const auto flat = make_varcoeff("const", kolmogorov());
    for (size_t i = 0; i < flat.omega_a.omega.size(); ++i) CHECK(flat.omega_a.omega[i] == 0.0);
    for (size_t i = 0; i < 20; ++i) {
        const double r = sin.omega_a.radii[i];
        INFO("r = " << r);
        CHECK(sin.omega_a.omega[i] <= 0.5 * r * (1 + 1e-9));
        CHECK(sin.omega_a.omega[i] >= 0.35 * r);
        CHECK(sin2.omega_a.omega[i] == doctest::Approx(2.0 * sin.omega_a.omega[i]).epsilon(1e-12));
    }
    CHECK(sin.lambda > 0.5);
    CHECK(sin.Lambda <= 1.5);

    const auto weak = make_spec(Matrix::Constant(1, 1, 0.6), kolmogorov().B, {1, 1}, "weak");
    CHECK_NOTHROW(make_varcoeff("sin", weak));
    try {
        make_varcoeff("sin2", weak);
        FAIL("expected an ellipticity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ellipticity);
    }
    CHECK_THROWS_AS(make_varcoeff("cos", kolmogorov()), Error);

    const auto p = manufacture("gauss", kolmogorov(), std::string("sin"));
    CHECK(p.fd_mismatch < 1e-8);
}

TEST_CASE("apply_L_fd on polynomials") {
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto spec = random_spec(rng, k % 2 == 0, 3);
        const int n = spec.N;
        Matrix P = kolmo::testing::random_matrix(n, n, rng);
        P = 0.5 * (P + P.transpose()).eval();
        const double c = kolmo::testing::gauss(rng);
        auto u = [P, c](const Point& z) { return z.x.dot(P * z.x) + c * z.t; };
        for (int j = 0; j < 5; ++j) {
            const Point z = random_point(n, rng);
            const double exact =
                2.0 * (spec.A.array() * P.topLeftCorner(spec.m, spec.m).array()).sum() +
                2.0 * (spec.B * z.x).dot(P * z.x) - c;
            INFO("spec " << k << " point " << j);
            // The Y flow of a quadratic is not polynomial in the step; Richardson leaves O(h^4).
            CHECK(apply_L_fd(spec, u, z) == doctest::Approx(exact).epsilon(1e-7));
        }
    }
    auto sq = [](const Point& z) { return z.x[0] * z.x[0]; };
    CHECK(apply_L_fd(kolmogorov(), sq, pt({0.3, -0.7}, 0.2)) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK_THROWS_AS(apply_L_fd(kolmogorov(), sq, pt({0.3, -0.7}, 0.2), 0.0), Error);
    CHECK_THROWS_AS(apply_L_fd(kolmogorov(), sq, pt({0.3}, 0.2)), Error);
    auto kink = [](const Point& z) { return std::abs(z.x[0]); };
    try {
        apply_L_fd(kolmogorov(), kink, pt({0.0, 0.1}, 0.0));
        FAIL("expected an accuracy error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Accuracy);
    }
}

TEST_CASE("apply_L_fd annihilates the kernel") {
    for (const char* name : {"kolmogorov", "ex42", "kappa2"}) {
        const KernelContext ctx(named_spec(name));
        const int n = ctx.spec().N;
        Rng rng(8);
        int accepted = 0;
        while (accepted < 15) {
            Point pole = random_point(n, rng, 0.5);
            pole.t = -1.0 - uniform(rng, 0.0, 1.0);
            const Point z = random_point(n, rng, 0.5);
            // Deep in the Gaussian tail the kernel is below the differencing noise.
            if (gamma(ctx, z, pole) < 1e-3) continue;
            ++accepted;
            auto u = [&](const Point& p) { return gamma(ctx, p, pole); };
            INFO(name << " sample " << accepted);
            CHECK(std::abs(apply_L_fd(ctx.spec(), u, z)) <= 1e-6 * gamma(ctx, z, pole));
        }
    }
}

TEST_CASE("apply_L_fd matches manufactured f") {
    for (const char* vc : {"const", "sin", "sin2"}) {
        const auto p = manufacture("gauss2", kolmogorov(), std::string(vc));
        Rng rng(31);
        for (int k = 0; k < 100; ++k) {
            const Point z = sample_unit_ball(kolmogorov_ctx().exps(), 1.0, rng);
            CHECK(std::abs(apply_L_fd(p.spec, p.a, p.u.u, z) - p.f(z)) <= 1e-6);
        }
    }
}

TEST_CASE("convolve_solution reconstructs manufactured solutions") {
    const auto& ctx = kolmogorov_ctx();
    const auto zero = manufacture("zero", kolmogorov());
    SupportBox box{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), -1.0, 1.0};
    CHECK(convolve_solution(ctx, zero.f, box, pt({0.1, 0.2}, 0.3)).value == 0.0);

    for (const char* fam : {"gauss", "polybump"}) {
        const auto p = manufacture(fam, kolmogorov());
        for (const Point& z : {pt({0.0, 0.0}, 0.0), pt({0.3, -0.2}, 0.4), pt({-0.5, 0.3}, -0.3)}) {
            const auto r = convolve_solution(ctx, p.f, p.support, z);
            INFO(fam << " at t = " << z.t);
            CHECK(r.refinement_change <= 1e-4);
            CHECK(std::abs(r.value - p.u.u(z)) <= 1e-3 * std::abs(p.u.u(z)));
        }
        // Before the support nothing has been generated yet.
        Point early = Point::origin(2);
        early.t = p.support.t_lo - 0.1;
        CHECK(convolve_solution(ctx, p.f, p.support, early).value == 0.0);
    }

    SupportBox bad = box;
    bad.lo[0] = 2.0;
    CHECK_THROWS_AS(convolve_solution(ctx, zero.f, bad, Point::origin(2)), Error);
    bad = box;
    bad.t_hi = bad.t_lo;
    CHECK_THROWS_AS(convolve_solution(ctx, zero.f, bad, Point::origin(2)), Error);
}

TEST_CASE("convolve_solution matches the 1-D Duhamel formula") {
    const KernelContext ctx(named_spec("heat1d"));
    const HeatSource src;
    const SupportBox box{Vector::Constant(1, -8.0 * src.sigma), Vector::Constant(1, 8.0 * src.sigma), 0.0, src.T};
    for (const Point& z : {pt({0.0}, 0.25), pt({0.3}, 0.5), pt({-0.6}, 0.9), pt({1.2}, 1.5)}) {
        const double exact = src.solution(z.x[0], z.t);
        const auto r = convolve_solution(ctx, [&](const Point& p) { return src.f(p); }, box, z);
        INFO("x " << z.x[0] << " t " << z.t);
        CHECK(std::abs(r.value - exact) <= 1e-4 * std::abs(exact));
    }
}

TEST_CASE("cut-off function") {
    const Exponents& ex = kolmogorov_ctx().exps();
    for (double R : {1.0, 0.5, 0.25}) {
        CHECK(cutoff_chi(0.75 * R, R) == 1.0);
        CHECK(cutoff_chi(R, R) == 0.0);
        CHECK(cutoff_eta(R, pt({0.5 * R, 0.0}, 0.0), ex) == 1.0);
        CHECK(cutoff_eta_grad(R, pt({0.5 * R, 0.0}, 0.0), ex).norm() == 0.0);
        CHECK(cutoff_eta(R, pt({R, 0.0}, 0.0), ex) == 0.0);
        CHECK(cutoff_eta(R, pt({0.0, 0.0}, 1.1 * R * R), ex) == 0.0);
        double prev = 1.0;
        for (int k = 0; k <= 100; ++k) {
            const double v = cutoff_chi(0.75 * R + 0.0025 * R * k, R);
            CHECK(v <= prev);
            prev = v;
        }
    }
    // C^2 joins: one-sided second differences vanish at both ends.
    const double h = 1e-4;
    CHECK(std::abs(cutoff_chi(0.75 + h, 1.0) - 1.0) < 1e-9);
    CHECK(std::abs(cutoff_chi(1.0 - h, 1.0)) < 1e-9);

    Rng rng(4);
    for (int k = 0; k < 50; ++k) {
        const Point z = sample_unit_ball(ex, 1.0, rng);
        const Vector g = cutoff_eta_grad(1.0, z, ex);
        for (int i = 0; i < 2; ++i) {
            auto f = [&](double s) {
                Point p = z;
                p.x[i] = s;
                return cutoff_eta(1.0, p, ex);
            };
            CHECK(g[i] == doctest::Approx(kolmo::testing::central_diff(f, z.x[i], 1e-7)).epsilon(1e-4).scale(1.0));
        }
    }

    std::vector<CutoffReport> reps;
    for (double R : {1.0, 0.5, 0.25}) reps.push_back(cutoff_report(R, ex, 4000, 9));
    for (size_t i = 0; i < 2; ++i) {
        double lo = 1e300, hi = 0.0;
        for (const auto& r : reps) {
            lo = std::min(lo, r.grad_scaled[i]);
            hi = std::max(hi, r.grad_scaled[i]);
        }
        CHECK(lo > 0.0);
        CHECK(hi <= 2.0 * lo);
    }
    CHECK(reps[0].dt_scaled > 0.0);
    CHECK(reps[2].dt_scaled <= 2.0 * reps[0].dt_scaled);
    CHECK_THROWS_AS(cutoff_eta(0.0, Point::origin(2), ex), Error);
    CHECK_THROWS_AS(cutoff_eta(1.5, Point::origin(2), ex), Error);
}

TEST_CASE("interior estimates on the harmonic family") {
    const auto& ctx = kolmogorov_ctx();
    const auto family = harmonic_family(ctx, 0.5, 20, 1);
    REQUIRE(family.size() == 22);
    CHECK(family[20].name == "constant");
    CHECK(family[21].name == "affine");
    for (const auto& member : family) {
        Rng rng(2);
        const Point z = sample_unit_ball(ctx.exps(), 0.5, rng);
        const ScalarFn u = [&](const Point& p) { return member.jet(p).u; };
        INFO(member.name);
        CHECK(std::abs(apply_L_fd(ctx.spec(), u, z)) <= 1e-6 * std::max(std::abs(u(z)), 0.01));
    }

    const auto rep = verify_apriori(ctx, {1.0, 0.5, 0.25});
    CHECK(rep.pass);
    for (const char* k : {"grad_alpha1", "grad_alpha3", "hess", "Y"}) {
        INFO(k);
        REQUIRE(rep.scaling.at(k).size() == 3);
        CHECK(rep.constants.at(k) > 0.0);
        CHECK(std::isfinite(rep.constants.at(k)));
    }

    const auto mv = verify_mean_value(ctx, {1.0, 0.5, 0.25});
    CHECK(mv.pass);
    const double C = mv.constants.at("C");
    CHECK(std::isfinite(C));
    int affine = 0;
    for (const auto& row : mv.rows) {
        if (row.quantity != "affine") continue;
        ++affine;
        // |x_1| <= kdist with equality where x_1 dominates, and sup |x_1| ~ R on Q_R.
        CHECK(row.ratio <= 1.01);
        CHECK(row.ratio >= 0.99);
        CHECK(row.ratio <= C);
    }
    CHECK(affine == 3);
}

TEST_CASE("interior estimates without dilation invariance") {
    const KernelContext ctx(named_spec("ex42"));
    VerifyOptions opt;
    opt.poles = 10;
    opt.points = 100;
    opt.sup_points = 200;
    const auto rep = verify_apriori(ctx, {1.0, 0.5, 0.25}, opt);
    CHECK(rep.pass);
    const auto mv = verify_mean_value(ctx, {1.0, 0.5, 0.25}, opt);
    CHECK(mv.pass);
}

TEST_CASE("singular integral scalings") {
    const auto& ctx = kolmogorov_ctx();
    const std::vector<double> Rs = {0.5, 0.25, 0.125};
    const std::map<SingularKind, double> expected = {
        {SingularKind::Const, 1.0}, {SingularKind::G1, 0.5}, {SingularKind::G2, 0.25}};
    std::map<SingularKind, std::vector<double>> steps;
    for (const auto& [kind, e] : expected) {
        SingularOptions opt;
        opt.points = 4;
        const auto rep = verify_singular_bounds(ctx, kind, Rs, opt);
        INFO(to_string(kind));
        CHECK(rep.pass);
        for (double s : rep.scaling.at("step_ratio")) CHECK(s == doctest::Approx(e).epsilon(0.05));
        steps[kind] = rep.scaling.at("step_ratio");
    }
    for (size_t k = 0; k < 2; ++k) {
        CHECK(steps[SingularKind::Const][k] >= 1.5 * steps[SingularKind::G1][k]);
        CHECK(steps[SingularKind::G1][k] >= 1.5 * steps[SingularKind::G2][k]);
    }
    CHECK(parse_singular_kind("g2") == SingularKind::G2);
    CHECK_THROWS_AS(parse_singular_kind("g3"), Error);
    CHECK_THROWS_AS(verify_singular_bounds(ctx, SingularKind::Const, {0.5}), Error);
}

TEST_CASE("singular hessian against differences of the potential") {
    const auto& ctx = kolmogorov_ctx();
    const Exponents& ex = ctx.exps();
    const double R = 0.5;
    const SupportBox box{(Vector(2) << -R, -R * R * R).finished(), (Vector(2) << R, R * R * R).finished(), -R * R,
                         R * R};
    ConvolutionOptions copt;
    copt.rel_tol = 1e-6;
    for (SingularKind kind : {SingularKind::Const, SingularKind::G1}) {
        auto density = [&](const Point& p) {
            const double g = kind == SingularKind::Const ? 1.0 : p.x[0];
            return cutoff_eta(R, p, ex) * g;
        };
        // convolve_solution returns -int Gamma F.
        auto w = [&](const Point& p) { return -convolve_solution(ctx, density, box, p, copt).value; };
        const Point z = pt({0.05, 0.01}, 0.02);
        auto second = [&](double h) {
            Point a = z, b = z;
            a.x[0] += h;
            b.x[0] -= h;
            return (w(a) - 2.0 * w(z) + w(b)) / (h * h);
        };
        const double fd = (4.0 * second(0.02) - second(0.04)) / 3.0;
        const Matrix H = singular_hessian(ctx, kind, R, z);
        INFO(to_string(kind));
        CHECK(H(0, 0) == doctest::Approx(fd).epsilon(5e-3));
    }
}

TEST_CASE("Schauder estimate with constant coefficients") {
    const auto& ctx = kolmogorov_ctx();
    const auto zero = verify_schauder_const(ctx, manufacture("zero", kolmogorov()));
    CHECK(zero.constants.at("C_i") == 0.0);
    CHECK(zero.constants.at("C_ii") == 0.0);
    CHECK(zero.pass);

    std::map<std::string, std::vector<double>> ci, cii;
    for (const char* fam : {"gauss", "polybump"}) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            VerifyOptions opt;
            opt.seed = seed;
            const auto rep = verify_schauder_const(ctx, manufacture(fam, kolmogorov()), opt);
            CHECK(rep.pass);
            CHECK(rep.samples == 1000);
            CHECK(rep.constants.at("C_i") > 0.0);
            CHECK(rep.constants.at("C_ii") > 0.0);
            ci[fam].push_back(rep.constants.at("C_i"));
            cii[fam].push_back(rep.constants.at("C_ii"));
        }
    }
    auto spread = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
    };
    for (const char* fam : {"gauss", "polybump"}) {
        CHECK(spread(ci[fam]) <= 2.0);
        CHECK(spread(cii[fam]) <= 2.0);
    }
    CHECK(spread({ci["gauss"][0], ci["polybump"][0]}) <= 2.0);
    CHECK(spread({cii["gauss"][0], cii["polybump"][0]}) <= 2.0);

    const auto base = verify_schauder_const(ctx, manufacture("gauss2", kolmogorov()));
    const auto tenfold = verify_schauder_const(ctx, manufacture("gauss2", kolmogorov(), std::nullopt, 10.0));
    CHECK(tenfold.constants.at("C_i") == doctest::Approx(base.constants.at("C_i")).epsilon(1e-10));
    CHECK(tenfold.constants.at("C_ii") == doctest::Approx(base.constants.at("C_ii")).epsilon(1e-10));
    CHECK(tenfold.constants.at("sup_u") == doctest::Approx(10.0 * base.constants.at("sup_u")).epsilon(1e-12));
}

TEST_CASE("Schauder estimate with variable coefficients") {
    const auto& ctx = kolmogorov_ctx();
    const auto c = verify_schauder_const(ctx, manufacture("gauss", kolmogorov()));
    const auto v = verify_schauder_var(ctx, manufacture("gauss", kolmogorov(), std::string("const")));
    REQUIRE(c.rows.size() == v.rows.size());
    for (size_t i = 0; i < c.rows.size(); ++i) CHECK(std::abs(c.rows[i].ratio - v.rows[i].ratio) <= 1e-10);
    CHECK(std::abs(c.constants.at("C_ii") - v.constants.at("C_ii")) <= 1e-10);

    const auto p1 = manufacture("gauss", kolmogorov(), std::string("sin"));
    const auto p2 = manufacture("gauss", kolmogorov(), std::string("sin2"));
    const auto r1 = verify_schauder_var(ctx, p1);
    const auto r2 = verify_schauder_var(ctx, p2);
    CHECK(r1.pass);
    CHECK(r2.pass);
    for (double d : {0.01, 0.1, 0.4}) {
        const double t1 = schauder_functional(p1.varcoeff->omega_a, d);
        const double t2 = schauder_functional(p2.varcoeff->omega_a, d);
        CHECK(t2 / t1 == doctest::Approx(2.0).epsilon(0.2));
    }
    const double a = r1.constants.at("C_ii"), b = r2.constants.at("C_ii");
    CHECK(std::max(a, b) <= 2.0 * std::min(a, b));

    CHECK_THROWS_AS(verify_schauder_var(ctx, manufacture("gauss", kolmogorov())), Error);
    CHECK_THROWS_AS(verify_schauder_const(ctx, p1), Error);

    auto bad = p1;
    bad.varcoeff->a = [](const Point& z) { return Matrix::Constant(1, 1, z.x[0]); };
    try {
        verify_schauder_var(ctx, bad);
        FAIL("expected an ellipticity error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Ellipticity);
    }
}

TEST_CASE("invariance identities") {
    const auto rep = verify_invariance(kolmogorov_ctx());
    CHECK(rep.pass);
    CHECK(rep.constants.at("left_error") <= 1e-5);
    CHECK(rep.constants.at("dilation_error") <= 1e-5);

    const KernelContext ex42(named_spec("ex42"));
    try {
        verify_invariance(ex42);
        FAIL("expected an applicability error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Applicability);
    }
    InvarianceOptions opt;
    opt.dilation = false;
    CHECK(verify_invariance(ex42, opt).pass);

    // Quadratic polynomials: both identities hold up to rounding.
    const auto& spec = kolmogorov();
    const Exponents& ex = kolmogorov_ctx().exps();
    auto u = [](const Point& z) { return z.x[0] * z.x[0] - 3.0 * z.x[0] * z.x[1] + z.t; };
    Rng rng(6);
    for (int k = 0; k < 20; ++k) {
        const Point z = random_point(2, rng), zeta = random_point(2, rng);
        const double r = uniform(rng, 0.2, 1.0);
        const double l1 = apply_L_fd(spec, [&](const Point& p) { return u(compose(zeta, p, spec)); }, z);
        CHECK(l1 == doctest::Approx(apply_L_fd(spec, u, compose(zeta, z, spec))).epsilon(1e-8));
        const double l2 = apply_L_fd(spec, [&](const Point& p) { return u(dilate(r, p, ex)); }, z);
        CHECK(l2 == doctest::Approx(r * r * apply_L_fd(spec, u, dilate(r, z, ex))).epsilon(1e-8));
    }

    Rng specs(44);
    for (int k = 0; k < 5; ++k) {
        const KernelContext ctx(random_spec(specs, true, 2));
        InvarianceOptions o;
        o.samples = 10;
        o.seed = static_cast<std::uint64_t>(k);
        CHECK(verify_invariance(ctx, o).pass);
    }
}
