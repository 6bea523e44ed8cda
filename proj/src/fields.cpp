#include "kolmo/fields.hpp"

#include <cmath>

#include "kolmo/error.hpp"

namespace kolmo {

double lie_from_jet(const Jet& j, const Point& z, const OperatorSpec& spec) {
    return (spec.B * z.x).dot(j.grad) - j.ut;
}

C2Bundle bundle_from_jet(const std::string& name, JetFn jet, const OperatorSpec& spec) {
    const int m = spec.m;
    C2Bundle b;
    b.name = name;
    b.u = [jet](const Point& z) { return jet(z).u; };
    b.grad_m = [jet, m](const Point& z) { return Vector(jet(z).grad.head(m)); };
    b.hess_m = [jet, m](const Point& z) { return Matrix(jet(z).hess.topLeftCorner(m, m)); };
    b.Yu = [jet, spec](const Point& z) { return lie_from_jet(jet(z), z, spec); };
    return b;
}

Jet bump_jet(const BumpParams& p, const Point& z) {
    const int n = z.N();
    Vector qx(n);   // dq/dx_i
    Vector q2(n);   // d2q/dx_i^2
    double q = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s2 = p.sigma[i] * p.sigma[i];
        const double d = z.x[i] - p.center[i];
        q += d * d / s2;
        qx[i] = 2.0 * d / s2;
        q2[i] = 2.0 / s2;
    }
    const double dt = z.t - p.center_t;
    q += dt * dt / (p.sigma_t * p.sigma_t);
    const double qt = 2.0 * dt / (p.sigma_t * p.sigma_t);

    double f = 0.0, f1 = 0.0, f2 = 0.0;
    if (p.shape == BumpShape::Gauss) {
        f = std::exp(-q);
        f1 = -f;
        f2 = f;
    } else if (q < 1.0) {
        const double r = 1.0 - q;
        f = r * r * r * r;
        f1 = -4.0 * r * r * r;
        f2 = 12.0 * r * r;
    }
    Jet j;
    j.u = p.amp * f;
    j.grad = p.amp * f1 * qx;
    j.hess = p.amp * f2 * qx * qx.transpose();
    j.hess.diagonal() += p.amp * f1 * q2;
    j.ut = p.amp * f1 * qt;
    return j;
}

JetFn bump(const BumpParams& p) {
    if (p.center.size() != p.sigma.size()) throw Error(ErrorKind::Dimension, "bump: center and sigma differ in length");
    return [p](const Point& z) { return bump_jet(p, z); };
}

JetFn monomial(std::vector<int> e, int et) {
    return [e, et](const Point& z) {
        const int n = z.N();
        if (static_cast<int>(e.size()) != n) throw Error(ErrorKind::Dimension, "monomial: exponent length mismatch");
        auto pw = [](double b, int k) { return k <= 0 ? (k == 0 ? 1.0 : 0.0) : std::pow(b, k); };
        auto factor = [&](int i, int order) {
            // d^order/dx^order of x_i^{e_i}
            const int k = e[static_cast<size_t>(i)];
            double c = 1.0;
            for (int r = 0; r < order; ++r) c *= (k - r);
            return c * pw(z.x[i], k - order);
        };
        auto prod = [&](int skip1, int o1, int skip2, int o2) {
            double v = 1.0;
            for (int i = 0; i < n; ++i) {
                int order = 0;
                if (i == skip1) order += o1;
                if (i == skip2) order += o2;
                v *= factor(i, order);
            }
            return v;
        };
        Jet j;
        const double tp = pw(z.t, et);
        j.u = prod(-1, 0, -1, 0) * tp;
        j.grad.resize(n);
        j.hess.resize(n, n);
        for (int i = 0; i < n; ++i) {
            j.grad[i] = prod(i, 1, -1, 0) * tp;
            for (int k = 0; k < n; ++k) j.hess(i, k) = prod(i, 1, k, 1) * tp;
        }
        j.ut = et == 0 ? 0.0 : et * pw(z.t, et - 1) * prod(-1, 0, -1, 0);
        return j;
    };
}

JetFn constant(double c, int n) {
    return [c, n](const Point&) {
        Jet j;
        j.u = c;
        j.grad = Vector::Zero(n);
        j.hess = Matrix::Zero(n, n);
        return j;
    };
}

JetFn kernel_translate(const KernelContext& ctx, Point pole) {
    return [&ctx, pole](const Point& z) {
        Jet j;
        const int n = ctx.spec().N;
        if (!(z.t > pole.t)) {
            j.grad = Vector::Zero(n);
            j.hess = Matrix::Zero(n, n);
            return j;
        }
        j.u = gamma(ctx, z, pole);
        j.grad = gamma_grad(ctx, z, pole);
        j.hess = gamma_hess(ctx, z, pole);
        j.ut = (ctx.spec().B * z.x).dot(j.grad) - gamma_Y(ctx, z, pole);
        return j;
    };
}

JetFn trig_mix(int n) {
    return [n](const Point& z) {
        Jet j;
        const double x0 = z.x[0];
        const double xl = z.x[n - 1];
        j.grad = Vector::Zero(n);
        j.hess = Matrix::Zero(n, n);
        j.u = std::sin(x0) * std::cos(z.t) + x0 * x0 * xl;
        j.ut = -std::sin(x0) * std::sin(z.t);
        if (n == 1) {
            j.u = std::sin(x0) * std::cos(z.t) + x0 * x0 * x0;
            j.grad[0] = std::cos(x0) * std::cos(z.t) + 3 * x0 * x0;
            j.hess(0, 0) = -std::sin(x0) * std::cos(z.t) + 6 * x0;
            return j;
        }
        j.grad[0] = std::cos(x0) * std::cos(z.t) + 2 * x0 * xl;
        j.grad[n - 1] = x0 * x0;
        j.hess(0, 0) = -std::sin(x0) * std::cos(z.t) + 2 * xl;
        j.hess(0, n - 1) = j.hess(n - 1, 0) = 2 * x0;
        return j;
    };
}

std::vector<C2Bundle> degree_two_suite(const OperatorSpec& spec) {
    const int n = spec.N;
    std::vector<C2Bundle> out;
    out.push_back(bundle_from_jet("one", constant(1.0, n), spec));
    out.push_back(bundle_from_jet("t", monomial(std::vector<int>(static_cast<size_t>(n), 0), 1), spec));
    for (int i = 0; i < spec.m; ++i) {
        std::vector<int> e(static_cast<size_t>(n), 0);
        e[static_cast<size_t>(i)] = 1;
        out.push_back(bundle_from_jet("x" + std::to_string(i), monomial(e, 0), spec));
        for (int k = i; k < spec.m; ++k) {
            std::vector<int> q(static_cast<size_t>(n), 0);
            ++q[static_cast<size_t>(i)];
            ++q[static_cast<size_t>(k)];
            out.push_back(bundle_from_jet("x" + std::to_string(i) + "x" + std::to_string(k), monomial(q, 0), spec));
        }
    }
    return out;
}

std::vector<C2Bundle> taylor_suite(const OperatorSpec& spec) {
    const int n = spec.N;
    std::vector<C2Bundle> out;
    BumpParams g;
    g.center = Vector::Constant(n, 0.2);
    g.sigma = Vector::Constant(n, 0.8);
    g.center_t = -0.1;
    g.sigma_t = 0.9;
    out.push_back(bundle_from_jet("gauss", bump(g), spec));
    BumpParams pb = g;
    pb.shape = BumpShape::Poly;
    pb.sigma = Vector::Constant(n, 2.0);
    pb.sigma_t = 2.0;
    out.push_back(bundle_from_jet("polybump", bump(pb), spec));
    out.push_back(bundle_from_jet("trig", trig_mix(n), spec));
    if (spec.blocks.kappa() >= 1) {
        std::vector<int> e(static_cast<size_t>(n), 0);
        e[static_cast<size_t>(spec.m)] = 1;
        out.push_back(bundle_from_jet("level1", monomial(e, 0), spec));
    }
    std::vector<int> sq(static_cast<size_t>(n), 0);
    sq[0] = 2;
    out.push_back(bundle_from_jet("t2x0", monomial(sq, 1), spec));
    return out;
}

double bundle_fd_mismatch(const C2Bundle& b, const OperatorSpec& spec, const std::vector<Point>& points, double h) {
    double worst = 0.0;
    const int m = spec.m;
    for (const Point& z : points) {
        auto shifted = [&](int i, double d) {
            Point p = z;
            p.x[i] += d;
            return p;
        };
        const Vector g = b.grad_m(z);
        const Matrix H = b.hess_m(z);
        for (int i = 0; i < m; ++i) {
            const double fd = (b.u(shifted(i, h)) - b.u(shifted(i, -h))) / (2 * h);
            worst = std::max(worst, std::abs(fd - g[i]) / (1.0 + std::abs(g[i])));
            const double fd2 = (b.grad_m(shifted(i, h))[i] - b.grad_m(shifted(i, -h))[i]) / (2 * h);
            worst = std::max(worst, std::abs(fd2 - H(i, i)) / (1.0 + std::abs(H(i, i))));
        }
        const double yfd = (b.u(Point(mat_exp(h * spec.B) * z.x, z.t - h)) -
                            b.u(Point(mat_exp(-h * spec.B) * z.x, z.t + h))) /
                           (2 * h);
        const double y = b.Yu(z);
        worst = std::max(worst, std::abs(yfd - y) / (1.0 + std::abs(y)));
    }
    return worst;
}

}  // namespace kolmo
