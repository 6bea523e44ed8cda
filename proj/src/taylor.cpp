#include "kolmo/taylor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kolmo {

namespace {

double flow_difference(const ScalarFn& u, const Point& z, const OperatorSpec& spec, double h) {
    const Point fwd(mat_exp(h * spec.B) * z.x, z.t - h);
    const Point bwd(mat_exp(-h * spec.B) * z.x, z.t + h);
    return (u(fwd) - u(bwd)) / (2.0 * h);
}

Vector increments(const Point& z, const Point& zeta, TaylorForm form, const OperatorSpec& spec) {
    const Vector d = form == TaylorForm::Euclidean ? Vector(zeta.x - z.x) : relative(z, zeta, spec).x;
    return d.head(spec.m);
}

/// Flips (v, s) so that the first nonzero entry of v is positive.
void canonicalize(Vector& v, double& s) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) {
            if (v[i] < 0.0) {
                v = -v;
                s = -s;
            }
            return;
        }
    }
}

void append(std::vector<PathSegment>& out, PathSegment seg) { out.push_back(std::move(seg)); }

PathSegment x_segment(const Vector& v, double s, const Point& start, int level) {
    PathSegment seg;
    seg.kind = SegmentKind::X;
    seg.v = v;
    seg.s = s;
    seg.start = start;
    seg.end = flow_X(v, s, start);
    seg.level = level;
    return seg;
}

PathSegment y_segment(double s, const Point& start, const OperatorSpec& spec, int level) {
    PathSegment seg;
    seg.kind = SegmentKind::Y;
    seg.s = s;
    seg.start = start;
    seg.end = flow_Y(s, start, spec);
    seg.level = level;
    return seg;
}

void traj_into(int n, int tag, const Vector& v, double s, Point z, const OperatorSpec& spec,
               std::vector<PathSegment>& out) {
    if (n == 0) {
        append(out, x_segment(v, s, z, tag));
        return;
    }
    traj_into(n - 1, tag, v, s, z, spec, out);
    append(out, y_segment(s * s, Point(out.back().end), spec, tag));
    traj_into(n - 1, tag, v, -s, Point(out.back().end), spec, out);
    append(out, y_segment(-s * s, Point(out.back().end), spec, tag));
}

Point current(const PathPlan& plan) { return plan.endpoint(); }

/// Moves level 0 of the current endpoint onto the target's level 0.
void level0_move(PathPlan& plan, const OperatorSpec& spec) {
    const Point cur = current(plan);
    Vector diff = project_level(plan.target.x - cur.x, 0, spec.blocks);
    const double len = diff.norm();
    if (len == 0.0) return;
    Vector v = diff / len;
    double s = len;
    canonicalize(v, s);
    append(plan.segments, x_segment(v, s, cur, 0));
}

/// Parameter s solving <P_n d_n(s), e> = c. Scans geometrically outward
/// from the dilation-invariant guess in both signs, then bisects the first
/// bracket found.
double solve_level_parameter(int n, const Vector& v, double guess, const Vector& dir, double c,
                             const OperatorSpec& spec) {
    auto g = [&](double s) { return project_level(traj_increment(n, v, s, spec), n, spec.blocks).dot(dir) - c; };
    double a = 0.0;
    double b = 0.0;
    bool found = false;
    double prev_pos = 0.0, prev_neg = 0.0;
    for (int k = -24; k <= 40 && !found; ++k) {
        const double mag = std::abs(guess) * std::exp2(k / 4.0);
        for (double sign : {1.0, -1.0}) {
            const double s = std::copysign(mag, sign * guess);
            const double gs = g(s);
            if (!std::isfinite(gs)) continue;
            if (gs >= 0.0) {
                a = sign > 0 ? prev_pos : prev_neg;
                b = s;
                found = true;
                break;
            }
            (sign > 0 ? prev_pos : prev_neg) = s;
        }
    }
    if (!found) {
        throw Error(ErrorKind::NonConvergence,
                    "connect: could not bracket the level-" + std::to_string(n) + " trajectory parameter");
    }
    for (int it = 0; it < 400 && std::abs(b - a) > 1e-15 * std::max(1.0, std::abs(b)); ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        (g(mid) < 0.0 ? a : b) = mid;
    }
    return std::abs(g(a)) < std::abs(g(b)) ? a : b;
}

void level_pass(PathPlan& plan, const OperatorSpec& spec, bool invariant) {
    for (int n = 1; n <= spec.blocks.kappa(); ++n) {
        const Point cur = current(plan);
        const Vector diff = project_level(plan.target.x - cur.x, n, spec.blocks);
        const double len = diff.norm();
        if (len == 0.0) continue;
        const Vector w = level_map_solve(spec, n, diff);
        const double wn = w.norm();
        if (wn == 0.0) continue;
        Vector v = w / wn;
        double s = n == 1 ? std::cbrt(wn) : std::pow(wn, 1.0 / (2 * n + 1));
        canonicalize(v, s);
        if (!invariant) s = solve_level_parameter(n, v, s, diff / len, len, spec);
        traj_into(n, n, v, s, cur, spec, plan.segments);
    }
}

void finish(PathPlan& plan, const OperatorSpec& spec, const Exponents& exps) {
    const Point end = current(plan);
    plan.achieved_error = max_abs_diff(end, plan.target);
    plan.kdist_error = kdist(end, plan.target, spec, exps);
}

}  // namespace

double lie_derivative_fd(const ScalarFn& u, const Point& z, const OperatorSpec& spec, double h) {
    if (!(h > 0.0)) throw Error(ErrorKind::Domain, "lie_derivative_fd: h must be positive");
    const double coarse = flow_difference(u, z, spec, h);
    const double fine = flow_difference(u, z, spec, 0.5 * h);
    if (!(std::abs(coarse - fine) <= 1e-4 * std::max(1.0, std::abs(fine)))) {
        throw Error(ErrorKind::Accuracy, "lie_derivative_fd: refinement changed the estimate from " +
                                             std::to_string(coarse) + " to " + std::to_string(fine));
    }
    return (4.0 * fine - coarse) / 3.0;
}

double taylor2(const C2Bundle& u, const Point& z, const Point& zeta, TaylorForm form, const OperatorSpec& spec) {
    const Vector d = increments(z, zeta, form, spec);
    const Vector g = u.grad_m(z);
    const Matrix h = u.hess_m(z);
    return u.u(z) + g.dot(d) + 0.5 * d.dot(h * d) - u.Yu(z) * (zeta.t - z.t);
}

std::vector<RemainderSample> remainder_profile(const C2Bundle& u, const Point& z,
                                               const std::function<Point(double)>& path,
                                               const std::vector<double>& rhos, TaylorForm form,
                                               const OperatorSpec& spec) {
    std::vector<RemainderSample> out;
    for (double rho : rhos) {
        if (!(rho > 0.0)) throw Error(ErrorKind::Domain, "remainder_profile: radii must be positive");
        const Point zeta = path(rho);
        RemainderSample r;
        r.rho = rho;
        r.remainder = std::abs(u.u(zeta) - taylor2(u, z, zeta, form, spec));
        r.ratio = r.remainder / (rho * rho);
        out.push_back(r);
    }
    return out;
}

std::vector<double> ymix_profile(const C2Bundle& u, const Point& z, const std::vector<double>& s_list,
                                 const OperatorSpec& spec) {
    std::vector<double> out;
    const Vector g0 = u.grad_m(z);
    for (double s : s_list) {
        const Vector gs = u.grad_m(flow_Y(s, z, spec));
        out.push_back((gs - g0).cwiseAbs().maxCoeff() / std::sqrt(std::abs(s)));
    }
    return out;
}

double taylor_form_constant(const C2Bundle& u, const OperatorSpec& spec, const Point& z, double radius, int samples,
                            std::uint64_t seed) {
    const Exponents exps = exponents_of(spec.blocks);
    Rng rng(seed);
    double c = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Point zeta = sample_ball(spec, exps, z, radius, rng);
        const double d = kdist(zeta, z, spec, exps);
        if (d < 1e-6 * radius) continue;
        const double diff = taylor2(u, z, zeta, TaylorForm::Euclidean, spec) - taylor2(u, z, zeta, TaylorForm::Group, spec);
        c = std::max(c, std::abs(diff) / (d * d));
    }
    return c;
}

Point flow_X(const Vector& v, double s, const Point& z) { return {z.x + s * v, z.t}; }

Point flow_Y(double s, const Point& z, const OperatorSpec& spec) { return {mat_exp(s * spec.B) * z.x, z.t - s}; }

Trajectory gamma_traj(int n, const Vector& v, double s, const Point& z, const OperatorSpec& spec) {
    if (n < 0) throw Error(ErrorKind::Domain, "gamma_traj: level must be nonnegative");
    Trajectory tr;
    traj_into(n, n, v, s, z, spec, tr.segments);
    tr.end = tr.segments.back().end;
    return tr;
}

Vector traj_increment(int n, const Vector& v, double s, const OperatorSpec& spec) {
    Vector d = s * v;
    if (n == 0) return d;
    const Matrix step = Matrix::Identity(spec.N, spec.N) - E_of(spec.B, s * s);
    for (int k = 0; k < n; ++k) d = step * d;
    return d;
}

PathPlan connect(const Point& z, const Point& zeta, const OperatorSpec& spec, double tol, int max_iterations) {
    if (!(tol > 0.0)) throw Error(ErrorKind::Domain, "connect: tolerance must be positive");
    const Exponents exps = validate_structure(spec);
    if (z.N() != spec.N || zeta.N() != spec.N) throw Error(ErrorKind::Dimension, "connect: point dimension mismatch");
    const bool invariant = is_dilation_invariant(spec);

    PathPlan plan;
    plan.source = z;
    plan.target = zeta;
    plan.tolerance = tol;
    if (max_abs_diff(z, zeta) == 0.0) return plan;

    if (z.t != zeta.t) append(plan.segments, y_segment(z.t - zeta.t, z, spec, -1));
    level0_move(plan, spec);

    PathPlan best;
    double best_error = std::numeric_limits<double>::infinity();
    for (int iter = 1; iter <= max_iterations; ++iter) {
        try {
            level_pass(plan, spec, invariant);
        } catch (const Error& e) {
            if (iter == 1) {
                finish(plan, spec, exps);
                best = plan;
            }
            throw PlanError(e.kind(), e.what(), best);
        }
        level0_move(plan, spec);
        finish(plan, spec, exps);
        plan.iterations = iter;
        plan.iteration_errors.push_back(plan.achieved_error);
        if (plan.achieved_error < best_error) {
            best_error = plan.achieved_error;
            best = plan;
        }
        if (plan.achieved_error <= tol) return plan;
        if (iter > 1 && plan.achieved_error >= plan.iteration_errors[plan.iteration_errors.size() - 2]) {
            throw PlanError(ErrorKind::NonConvergence,
                            "connect: correction loop stopped decreasing at error " + std::to_string(best_error),
                            best);
        }
    }
    throw PlanError(ErrorKind::NonConvergence,
                    "connect: iteration cap reached with error " + std::to_string(best_error), best);
}

PlanReport verify_plan(const PathPlan& plan, const OperatorSpec& spec) {
    const Exponents exps = exponents_of(spec.blocks);
    PlanReport rep;
    Point prev = plan.source;
    for (size_t k = 0; k < plan.segments.size(); ++k) {
        const PathSegment& seg = plan.segments[k];
        if (seg.start.N() != prev.N() || max_abs_diff(seg.start, prev) != 0.0) {
            throw Error(ErrorKind::PlanIntegrity, "segment " + std::to_string(k) + " does not start where the previous one ended");
        }
        const Point again = seg.kind == SegmentKind::X ? flow_X(seg.v, seg.s, seg.start) : flow_Y(seg.s, seg.start, spec);
        const double err = max_abs_diff(again, seg.end);
        const double scale = std::max({1.0, seg.end.x.cwiseAbs().maxCoeff(), std::abs(seg.end.t)});
        if (err > 1e-12 * scale) {
            throw Error(ErrorKind::PlanIntegrity, "segment " + std::to_string(k) + " does not re-execute (error " +
                                                      std::to_string(err) + ")");
        }
        rep.reexec_error = std::max(rep.reexec_error, err);
        rep.length += seg.kind == SegmentKind::X ? std::abs(seg.s) * seg.v.norm() : std::sqrt(std::abs(seg.s));
        prev = seg.end;
    }
    rep.endpoint_error = max_abs_diff(prev, plan.target);
    if (rep.endpoint_error > plan.tolerance) {
        throw Error(ErrorKind::PlanIntegrity, "plan endpoint misses the target by " + std::to_string(rep.endpoint_error));
    }
    rep.distance = kdist(plan.source, plan.target, spec, exps);
    rep.length_ratio = rep.distance > 0.0 ? rep.length / rep.distance : 0.0;
    return rep;
}

double fit_plan_length_constant(const OperatorSpec& spec, double radius, int samples, std::uint64_t seed) {
    const Exponents exps = validate_structure(spec);
    Rng rng(seed);
    double c = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Point z = sample_unit_ball(exps, radius, rng);
        const Point zeta = sample_unit_ball(exps, radius, rng);
        const PathPlan plan = connect(z, zeta, spec);
        c = std::max(c, verify_plan(plan, spec).length_ratio);
    }
    return c;
}

}  // namespace kolmo
