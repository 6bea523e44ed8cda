#include <doctest.h>

#include <cmath>

#include "kolmo/error.hpp"
#include "kolmo/group.hpp"
#include "kolmo/spec_io.hpp"
#include "support.hpp"

using namespace kolmo;
using kolmo::testing::random_point;
using kolmo::testing::random_spec;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::Usage;
}

Point P(double x, double y, double t) {
    Vector v(2);
    v << x, y;
    return {v, t};
}

}  // namespace

TEST_CASE("validate_structure") {
    const auto k = named_spec("kolmogorov");
    const Exponents e = validate_structure(k);
    CHECK(e.alpha == std::vector<int>{1, 3});
    CHECK(e.Q == 4);
    CHECK(e.Qplus2 == 6);
    CHECK(validate_structure(named_spec("kappa2")).Q == 10);

    Matrix b = Matrix::Zero(2, 2);
    try {
        validate_structure(make_spec(Matrix::Identity(1, 1), b, {1, 1}));
        FAIL("rank deficiency accepted");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Structure);
        CHECK(std::string(err.what()).find("level 1") != std::string::npos);
    }

    Matrix forbidden = named_spec("kappa2").B;
    forbidden(3, 0) = 0.5;
    try {
        validate_structure(make_spec(Matrix::Identity(2, 2), forbidden, {2, 1, 1}));
        FAIL("forbidden block accepted");
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Structure);
        CHECK(std::string(err.what()).find("(3, 0)") != std::string::npos);
    }

    Matrix a = Matrix::Identity(1, 1);
    a(0, 0) = -1.0;
    CHECK(kind_of([&] { validate_structure(make_spec(a, k.B, {1, 1})); }) == ErrorKind::Ellipticity);
    CHECK(kind_of([&] { validate_structure(make_spec(Matrix::Identity(1, 1), k.B, {2})); }) == ErrorKind::Dimension);
    CHECK(kind_of([&] { validate_structure(make_spec(Matrix::Identity(1, 1), Matrix::Zero(3, 3), {1, 2})); }) ==
          ErrorKind::Structure);

    Rng rng(1);
    for (int i = 0; i < 50; ++i) CHECK_NOTHROW(validate_structure(random_spec(rng, i % 2 == 0)));
}

TEST_CASE("hormander_check") {
    const auto r = hormander_check(named_spec("kolmogorov"), 1.0);
    CHECK(r.is_spd);
    const double expected = (4.0 / 3.0 - std::sqrt(16.0 / 9.0 - 1.0 / 3.0)) / 2.0;
    CHECK(r.min_eigenvalue == doctest::Approx(expected).epsilon(1e-10));

    OperatorSpec degenerate = make_spec(Matrix::Identity(1, 1), Matrix::Zero(2, 2), {1, 1});
    CHECK_FALSE(hormander_check(degenerate, 1.0).is_spd);
    CHECK(kind_of([&] { hormander_check(degenerate, 0.0); }) == ErrorKind::Domain);

    Rng rng(2);
    for (int i = 0; i < 40; ++i) {
        const auto spec = random_spec(rng, i % 2 == 0);
        for (double t : {0.1, 1.0}) CHECK(hormander_check(spec, t).is_spd);
    }
}

TEST_CASE("compose and inverse examples") {
    const auto k = named_spec("kolmogorov");
    const Point z = compose(P(1, 0, 0), P(0, 0, 1), k);
    CHECK(max_abs_diff(z, P(1, 1, 1)) < 1e-15);
    const Point w = P(0.3, -2, 0.7);
    CHECK(max_abs_diff(compose(w, P(0, 0, 0), k), w) < 1e-15);
    CHECK(max_abs_diff(compose(w, inverse(w, k), k), P(0, 0, 0)) < 1e-12);
    CHECK(max_abs_diff(inverse(P(1, 0, 0), k), P(-1, 0, 0)) == 0.0);
    CHECK(max_abs_diff(inverse(P(0, 0, 0), k), P(0, 0, 0)) == 0.0);
}

TEST_CASE("group laws on random triples") {
    Rng rng(3);
    for (int s = 0; s < 10; ++s) {
        const auto spec = random_spec(rng, s % 2 == 0);
        const int n = spec.N;
        for (int i = 0; i < 100; ++i) {
            const Point a = random_point(n, rng), b = random_point(n, rng), c = random_point(n, rng);
            const Point l = compose(compose(a, b, spec), c, spec);
            const Point r = compose(a, compose(b, c, spec), spec);
            CHECK(max_abs_diff(l, r) <= 1e-11);
            CHECK(max_abs_diff(compose(a, inverse(a, spec), spec), Point::origin(n)) <= 1e-12);
            CHECK(max_abs_diff(compose(inverse(a, spec), a, spec), Point::origin(n)) <= 1e-12);
            CHECK(max_abs_diff(inverse(inverse(a, spec), spec), a) <= 1e-12);
            CHECK(max_abs_diff(relative(a, b, spec), compose(inverse(a, spec), b, spec)) <= 1e-12);
        }
    }
}

TEST_CASE("dilations distribute over composition only for B0") {
    Rng rng(4);
    for (int s = 0; s < 10; ++s) {
        const auto spec = random_spec(rng, true);
        const auto e = validate_structure(spec);
        for (int i = 0; i < 50; ++i) {
            const Point a = random_point(spec.N, rng), b = random_point(spec.N, rng);
            const double r = uniform(rng, 0.1, 2.0);
            const Point l = dilate(r, compose(a, b, spec), e);
            const Point rr = compose(dilate(r, a, e), dilate(r, b, e), spec);
            CHECK(max_abs_diff(l, rr) <= 1e-11 * std::max(1.0, std::pow(r, 2 * e.alpha.back())));
        }
    }
    const auto ex42 = named_spec("ex42");
    const auto e = validate_structure(ex42);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Point a = random_point(2, rng), b = random_point(2, rng);
        worst = std::max(worst, max_abs_diff(dilate(0.5, compose(a, b, ex42), e),
                                             compose(dilate(0.5, a, e), dilate(0.5, b, e), ex42)));
    }
    CHECK(worst >= 1e-3);
}

TEST_CASE("dilate, knorm, kdist") {
    const Exponents e = exponents_of({{1, 1}});
    CHECK(max_abs_diff(dilate(0.5, P(2, 8, 4), e), P(1, 1, 1)) == 0.0);
    CHECK(max_abs_diff(dilate(1.0, P(2, 8, 4), e), P(2, 8, 4)) == 0.0);
    CHECK(max_abs_diff(dilate(3.0, dilate(1.0 / 3.0, P(2, 8, 4), e), e), P(2, 8, 4)) < 1e-14);
    CHECK_THROWS_AS(dilate(0.0, P(1, 1, 1), e), Error);
    CHECK(knorm(P(2, 8, 9), e) == 3.0);
    CHECK(knorm(P(0, 0, 0), e) == 0.0);
    CHECK(knorm(dilate(0.5, P(2, 8, 9), e), e) == doctest::Approx(1.5).epsilon(1e-15));

    const auto k = named_spec("kolmogorov");
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const Point z = random_point(2, rng), zeta = random_point(2, rng), w = random_point(2, rng);
        const double r = uniform(rng, 0.01, 3.0);
        CHECK(knorm(dilate(r, z, e), e) == doctest::Approx(r * knorm(z, e)).epsilon(1e-14));
        CHECK(kdist(z, z, k, e) == 0.0);
        CHECK(kdist(z, Point::origin(2), k, e) == doctest::Approx(knorm(z, e)).epsilon(1e-15));
        const double d0 = kdist(z, zeta, k, e);
        const double d1 = kdist(compose(w, z, k), compose(w, zeta, k), k, e);
        CHECK(std::abs(d0 - d1) <= 1e-12 * std::max(1.0, d0));
    }
}

TEST_CASE("scaled_B and compose_r") {
    const auto ex42 = named_spec("ex42");
    CHECK(scaled_B(ex42, 1.0) == ex42.B);
    Matrix b0(2, 2);
    b0 << 0, 0, 1, 0;
    CHECK(scaled_B(ex42, 0.0) == b0);
    Matrix half(2, 2);
    half << 0.25, 0, 1, 0;
    CHECK((scaled_B(ex42, 0.5) - half).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(scaled_B(ex42, 1.5), Error);
    CHECK_FALSE(is_dilation_invariant(ex42));
    CHECK(is_dilation_invariant(named_spec("kolmogorov")));

    Rng rng(7);
    for (int s = 0; s < 10; ++s) {
        const auto spec = random_spec(rng, false);
        const auto& bs = spec.blocks;
        const Matrix base = principal_B(spec);
        for (double r : {0.5, 0.25, 0.125}) {
            const Matrix diff = scaled_B(spec, r) - base;
            for (int p = 0; p <= bs.kappa(); ++p) {
                for (int q = std::max(0, p - 1); q <= bs.kappa(); ++q) {
                    if (q == p - 1) continue;
                    const auto rows = bs.sizes[static_cast<size_t>(p)], cols = bs.sizes[static_cast<size_t>(q)];
                    const Matrix got = diff.block(bs.offset(p), bs.offset(q), rows, cols) / std::pow(r, 2 + 2 * (q - p));
                    CHECK((got - spec.B.block(bs.offset(p), bs.offset(q), rows, cols)).cwiseAbs().maxCoeff() < 1e-12);
                }
            }
        }
        const Point a = random_point(spec.N, rng), b = random_point(spec.N, rng);
        CHECK(max_abs_diff(compose_r(a, b, spec, 1.0), compose(a, b, spec)) < 1e-15);
        OperatorSpec s0 = spec;
        s0.B = base;
        CHECK(max_abs_diff(compose_r(a, b, spec, 0.0), compose(a, b, s0)) < 1e-15);
        double prev = std::numeric_limits<double>::infinity();
        for (double r : {1.0, 0.5, 0.25, 0.125}) {
            const double gap = max_abs_diff(compose_r(a, b, spec, r), compose_r(a, b, spec, 0.0));
            CHECK(gap <= prev);
            prev = gap;
        }
        CHECK(prev < 0.1);
    }
}

TEST_CASE("project_level and level_map_solve") {
    const BlockStructure bs{{1, 1}};
    Vector x(2);
    x << 3.0, -4.0;
    CHECK(project_level(x, 0, bs) == Vector((Vector(2) << 3.0, 0.0).finished()));
    CHECK(project_level(x, 1, bs) == Vector((Vector(2) << 0.0, -4.0).finished()));
    CHECK_THROWS_AS(project_level(x, 2, bs), Error);

    const auto k = named_spec("kolmogorov");
    Vector target(2);
    target << 0.0, 2.5;
    const Vector w = level_map_solve(k, 1, target);
    CHECK(w[0] == doctest::Approx(-2.5));
    CHECK(w[1] == 0.0);
    CHECK(level_map_solve(k, 1, Vector::Zero(2)).norm() == 0.0);
    CHECK_THROWS_AS(level_map_solve(k, 0, target), Error);

    Rng rng(8);
    for (int s = 0; s < 40; ++s) {
        const auto spec = random_spec(rng, s % 2 == 0);
        Vector sum = Vector::Zero(spec.N);
        const Vector v = random_point(spec.N, rng).x;
        for (int n = 0; n <= spec.blocks.kappa(); ++n) sum += project_level(v, n, spec.blocks);
        CHECK(sum == v);
        for (int n = 1; n <= spec.blocks.kappa(); ++n) {
            const Vector tgt = project_level(random_point(spec.N, rng).x, n, spec.blocks);
            const Vector sol = level_map_solve(spec, n, tgt);
            const Matrix m = level_map_block(spec, n);
            const Vector image = m * sol.head(spec.m);
            CHECK((image - tgt.segment(spec.blocks.offset(n), spec.blocks.sizes[static_cast<size_t>(n)])).norm() <= 1e-10);
            CHECK(sol.tail(spec.N - spec.m).norm() == 0.0);
            // Orthogonal to ker(M): projection onto the null space vanishes.
            Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
            const int rank = static_cast<int>((svd.singularValues().array() > 1e-10).count());
            const Matrix null = svd.matrixV().rightCols(spec.m - rank);
            CHECK((null.transpose() * sol.head(spec.m)).norm() <= 1e-10);
            if (is_dilation_invariant(spec)) {
                Matrix pw = Matrix::Identity(spec.N, spec.N);
                for (int j = 0; j < n; ++j) pw = spec.B * pw;
                CHECK((pw * sol - tgt).norm() <= 1e-10);
            }
        }
    }
}

TEST_CASE("pseudo-triangle constant") {
    const auto abelian = make_spec(Matrix::Identity(2, 2), Matrix::Zero(2, 2), {2});
    CHECK(estimate_triangle_constant(abelian, 1.0, 2000, 1) == doctest::Approx(1.0));

    const auto k = named_spec("kolmogorov");
    const double c1 = estimate_triangle_constant(k, 1.0, 10000, 1);
    const double c2 = estimate_triangle_constant(k, 1.0, 10000, 2);
    CHECK(std::isfinite(c1));
    CHECK(c1 >= 1.0);
    CHECK(std::abs(c1 - c2) <= 0.1 * std::max(c1, c2));
    const double small = estimate_triangle_constant(k, 0.1, 10000, 1);
    CHECK(std::isfinite(small));
    CHECK(small <= 2.0 * c1);
}

TEST_CASE("sampled balls respect the quasi-distance") {
    const auto spec = named_spec("ex42");
    const auto e = validate_structure(spec);
    Rng rng(9);
    const Point c = P(0.3, -0.2, 0.1);
    for (int i = 0; i < 500; ++i) CHECK(kdist(sample_ball(spec, e, c, 0.5, rng), c, spec, e) < 0.5 + 1e-12);
}

TEST_CASE("spec files") {
    for (const char* name : {"kolmogorov", "ex41", "ex42", "heat1d", "laplace2d", "kappa2"}) {
        const auto file = load_spec(std::string(KOLMO_DATA_DIR) + "/specs/" + name + ".json");
        const auto builtin = named_spec(name);
        CHECK(file.A == builtin.A);
        CHECK(file.B == builtin.B);
        CHECK(file.blocks.sizes == builtin.blocks.sizes);
        CHECK(file.name == name);
        const auto round = parse_spec(spec_to_json(file));
        CHECK(round.B == file.B);
    }
    CHECK(kind_of([] { parse_spec("{"); }) == ErrorKind::Usage);
    CHECK(kind_of([] { parse_spec(R"({"N":2,"m":1,"A":[[1]],"B":[[0,0],[1]],"blocks":[1,1]})"); }) ==
          ErrorKind::Usage);
    CHECK(kind_of([] { load_spec("/nonexistent.json"); }) == ErrorKind::Usage);
    const auto rd = load_spec(std::string(KOLMO_DATA_DIR) + "/specs/rank_deficient.json");
    CHECK(kind_of([&] { validate_structure(rd); }) == ErrorKind::Structure);
}
