#include "kolmo/group.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kolmo/error.hpp"

namespace kolmo {

int BlockStructure::total() const {
    int n = 0;
    for (int s : sizes) n += s;
    return n;
}

int BlockStructure::offset(int n) const {
    int off = 0;
    for (int j = 0; j < n; ++j) off += sizes[static_cast<size_t>(j)];
    return off;
}

int BlockStructure::level_of(int i) const {
    int off = 0;
    for (size_t j = 0; j < sizes.size(); ++j) {
        off += sizes[j];
        if (i < off) return static_cast<int>(j);
    }
    throw Error(ErrorKind::Domain, "coordinate index " + std::to_string(i) + " outside the block structure");
}

OperatorSpec make_spec(const Matrix& A, const Matrix& B, std::vector<int> blocks, std::string name) {
    OperatorSpec spec;
    spec.A = A;
    spec.B = B;
    spec.blocks.sizes = std::move(blocks);
    spec.N = static_cast<int>(B.rows());
    spec.m = static_cast<int>(A.rows());
    spec.name = std::move(name);
    if (A.rows() != A.cols() || A.rows() == 0) throw Error(ErrorKind::Dimension, "A must be a non-empty square matrix");
    if (B.rows() != B.cols() || B.rows() == 0) throw Error(ErrorKind::Dimension, "B must be a non-empty square matrix");
    if (asymmetry(A) <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff())) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
        spec.lambda = solver.eigenvalues().minCoeff();
        spec.Lambda = solver.eigenvalues().maxCoeff();
    }
    return spec;
}

double max_abs_diff(const Point& a, const Point& b) {
    double d = std::abs(a.t - b.t);
    if (a.x.size() != b.x.size()) throw Error(ErrorKind::Dimension, "points of different dimension");
    if (a.x.size() > 0) d = std::max(d, (a.x - b.x).cwiseAbs().maxCoeff());
    return d;
}

Exponents exponents_of(const BlockStructure& blocks) {
    Exponents e;
    for (size_t n = 0; n < blocks.sizes.size(); ++n) {
        const int a = 2 * static_cast<int>(n) + 1;
        for (int k = 0; k < blocks.sizes[n]; ++k) e.alpha.push_back(a);
        e.Q += a * blocks.sizes[n];
    }
    e.Qplus2 = e.Q + 2;
    return e;
}

Exponents validate_structure(const OperatorSpec& spec) {
    const auto& sizes = spec.blocks.sizes;
    if (sizes.empty()) throw Error(ErrorKind::Structure, "block structure is empty");
    for (size_t j = 0; j < sizes.size(); ++j) {
        if (sizes[j] < 1) throw Error(ErrorKind::Structure, "block size m_" + std::to_string(j) + " must be positive");
        if (j > 0 && sizes[j] > sizes[j - 1]) {
            throw Error(ErrorKind::Structure, "block sizes must be nonincreasing (m_" + std::to_string(j) + " > m_" +
                                                  std::to_string(j - 1) + ")");
        }
    }
    const int N = spec.blocks.total();
    if (spec.N != N || spec.B.rows() != N || spec.B.cols() != N) {
        throw Error(ErrorKind::Dimension, "N, B and the block sizes disagree (sum of blocks " + std::to_string(N) + ")");
    }
    if (spec.m != sizes[0] || spec.A.rows() != spec.m || spec.A.cols() != spec.m) {
        throw Error(ErrorKind::Dimension, "m, A and m_0 disagree");
    }
    if (!spec.A.allFinite() || !spec.B.allFinite()) throw Error(ErrorKind::Domain, "A and B must have finite entries");

    if (asymmetry(spec.A) > 1e-12 * std::max(1.0, spec.A.cwiseAbs().maxCoeff())) {
        throw Error(ErrorKind::Ellipticity, "A is not symmetric");
    }
    const SpdReport a_report = spd_min_eigen(spec.A, 0.0);
    if (!a_report.is_spd) {
        throw Error(ErrorKind::Ellipticity,
                    "A is not positive definite (min eigenvalue " + std::to_string(a_report.min_eigenvalue) + ")");
    }

    const int kappa = spec.blocks.kappa();
    for (int p = 0; p <= kappa; ++p) {
        for (int q = 0; q + 1 < p; ++q) {
            const auto blk = spec.B.block(spec.blocks.offset(p), spec.blocks.offset(q), sizes[static_cast<size_t>(p)],
                                          sizes[static_cast<size_t>(q)]);
            for (Eigen::Index i = 0; i < blk.rows(); ++i) {
                for (Eigen::Index k = 0; k < blk.cols(); ++k) {
                    if (std::abs(blk(i, k)) > spec.zero_tol) {
                        std::ostringstream msg;
                        msg << "B has a nonzero entry at (" << spec.blocks.offset(p) + i << ", "
                            << spec.blocks.offset(q) + k << ") in the forbidden block (" << p << ", " << q << ")";
                        throw Error(ErrorKind::Structure, msg.str());
                    }
                }
            }
        }
    }
    for (int j = 1; j <= kappa; ++j) {
        const Matrix bj = spec.B.block(spec.blocks.offset(j), spec.blocks.offset(j - 1), sizes[static_cast<size_t>(j)],
                                       sizes[static_cast<size_t>(j - 1)]);
        Eigen::JacobiSVD<Matrix> svd(bj);
        int rank = 0;
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
            if (svd.singularValues()[k] > spec.rank_tol) ++rank;
        }
        if (rank != sizes[static_cast<size_t>(j)]) {
            throw Error(ErrorKind::Structure, "block B_" + std::to_string(j) + " at level " + std::to_string(j) +
                                                  " has rank " + std::to_string(rank) + ", expected " +
                                                  std::to_string(sizes[static_cast<size_t>(j)]));
        }
    }
    return exponents_of(spec.blocks);
}

Matrix embed_A(const OperatorSpec& spec) {
    Matrix a = Matrix::Zero(spec.N, spec.N);
    a.topLeftCorner(spec.m, spec.m) = spec.A;
    return a;
}

Matrix E_of(const Matrix& B, double tau) { return mat_exp(-tau * B); }

SpdReport hormander_check(const OperatorSpec& spec, double t) {
    if (!(t > 0.0)) throw Error(ErrorKind::Domain, "hormander_check: t must be positive");
    const Matrix at = embed_A(spec);
    const Matrix c = integrate_matrix(
        [&](double s) {
            const Matrix e = E_of(spec.B, s);
            Matrix v = e * at * e.transpose();
            return Matrix(0.5 * (v + v.transpose()));
        },
        t);
    const double tol = 1e-13 * std::max(1.0, c.cwiseAbs().maxCoeff());
    return spd_min_eigen(c, tol);
}

Point compose(const Point& z, const Point& zeta, const OperatorSpec& spec) {
    return {zeta.x + E_of(spec.B, zeta.t) * z.x, z.t + zeta.t};
}

Point inverse(const Point& z, const OperatorSpec& spec) { return {-(E_of(spec.B, -z.t) * z.x), -z.t}; }

Point relative(const Point& z, const Point& zeta, const OperatorSpec& spec) {
    return {zeta.x - E_of(spec.B, zeta.t - z.t) * z.x, zeta.t - z.t};
}

Point dilate(double r, const Point& z, const Exponents& exps) {
    if (!(r > 0.0)) throw Error(ErrorKind::Domain, "dilate: r must be positive");
    Point out = z;
    for (int i = 0; i < z.N(); ++i) out.x[i] = std::pow(r, exps.alpha[static_cast<size_t>(i)]) * z.x[i];
    out.t = r * r * z.t;
    return out;
}

double knorm(const Point& z, const Exponents& exps) {
    double n = std::sqrt(std::abs(z.t));
    for (int i = 0; i < z.N(); ++i) {
        const int a = exps.alpha[static_cast<size_t>(i)];
        const double v = std::abs(z.x[i]);
        const double root = a == 1 ? v : (a == 3 ? std::cbrt(v) : std::pow(v, 1.0 / a));
        n = std::max(n, root);
    }
    return n;
}

double kdist(const Point& z, const Point& zeta, const OperatorSpec& spec, const Exponents& exps) {
    return knorm(relative(zeta, z, spec), exps);
}

Matrix scaled_B(const OperatorSpec& spec, double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::Domain, "scaled_B: r must lie in [0, 1]");
    const auto& blocks = spec.blocks;
    Matrix out = Matrix::Zero(spec.N, spec.N);
    for (int p = 0; p <= blocks.kappa(); ++p) {
        for (int q = std::max(0, p - 1); q <= blocks.kappa(); ++q) {
            const int power = 2 + 2 * (q - p);
            const double factor = std::pow(r, power);
            const int rows = blocks.sizes[static_cast<size_t>(p)];
            const int cols = blocks.sizes[static_cast<size_t>(q)];
            out.block(blocks.offset(p), blocks.offset(q), rows, cols) =
                factor * spec.B.block(blocks.offset(p), blocks.offset(q), rows, cols);
        }
    }
    return out;
}

Matrix principal_B(const OperatorSpec& spec) { return scaled_B(spec, 0.0); }

bool is_dilation_invariant(const OperatorSpec& spec) {
    return (spec.B - principal_B(spec)).cwiseAbs().maxCoeff() <= spec.zero_tol;
}

OperatorSpec scaled_spec(const OperatorSpec& spec, double r) {
    OperatorSpec out = spec;
    out.B = scaled_B(spec, r);
    return out;
}

Point compose_r(const Point& z, const Point& zeta, const OperatorSpec& spec, double r) {
    return {zeta.x + E_of(scaled_B(spec, r), zeta.t) * z.x, z.t + zeta.t};
}

Vector project_level(const Vector& x, int n, const BlockStructure& blocks) {
    if (n < 0 || n > blocks.kappa()) throw Error(ErrorKind::Domain, "project_level: level out of range");
    Vector out = Vector::Zero(x.size());
    const int off = blocks.offset(n);
    const int len = blocks.sizes[static_cast<size_t>(n)];
    out.segment(off, len) = x.segment(off, len);
    return out;
}

Matrix level_map_block(const OperatorSpec& spec, int n) {
    Matrix power = Matrix::Identity(spec.N, spec.N);
    for (int k = 0; k < n; ++k) power = spec.B * power;
    return power.block(spec.blocks.offset(n), 0, spec.blocks.sizes[static_cast<size_t>(n)], spec.m);
}

Vector level_map_solve(const OperatorSpec& spec, int n, const Vector& target) {
    if (n < 1 || n > spec.blocks.kappa()) throw Error(ErrorKind::Domain, "level_map_solve: level out of range");
    if (target.size() != spec.N) throw Error(ErrorKind::Dimension, "level_map_solve: target has wrong length");
    const Matrix m = level_map_block(spec, n);
    const Vector rhs = target.segment(spec.blocks.offset(n), spec.blocks.sizes[static_cast<size_t>(n)]);
    Vector w = Vector::Zero(spec.N);
    if (rhs.cwiseAbs().maxCoeff() == 0.0) return w;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
    const Vector w0 = cod.solve(rhs);
    const double residual = (m * w0 - rhs).norm();
    if (!(residual <= 1e-10 * std::max(1.0, rhs.norm()))) {
        throw Error(ErrorKind::Solve, "level_map_solve: level " + std::to_string(n) +
                                          " target is not in the range of B^n (residual " + std::to_string(residual) +
                                          ")");
    }
    w.head(spec.m) = w0;
    return w;
}

double uniform(Rng& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

Point sample_unit_ball(const Exponents& exps, double R, Rng& rng) {
    Point z = Point::origin(exps.N());
    for (int i = 0; i < exps.N(); ++i) {
        const double h = std::pow(R, exps.alpha[static_cast<size_t>(i)]);
        z.x[i] = uniform(rng, -h, h);
    }
    z.t = uniform(rng, -R * R, R * R);
    return z;
}

Point sample_ball(const OperatorSpec& spec, const Exponents& exps, const Point& center, double R, Rng& rng) {
    return compose(center, sample_unit_ball(exps, R, rng), spec);
}

double estimate_triangle_constant(const OperatorSpec& spec, double radius, int samples, std::uint64_t seed) {
    if (!(radius > 0.0)) throw Error(ErrorKind::Domain, "estimate_triangle_constant: radius must be positive");
    if (samples < 100) throw Error(ErrorKind::Domain, "estimate_triangle_constant: at least 100 samples required");
    const Exponents exps = exponents_of(spec.blocks);
    Rng rng(seed);
    double c = 1.0;
    for (int k = 0; k < samples; ++k) {
        const Point z = sample_unit_ball(exps, radius, rng);
        const Point zeta = sample_unit_ball(exps, radius, rng);
        const double nz = knorm(z, exps);
        const double nzeta = knorm(zeta, exps);
        if (nz > 1e-12) c = std::max(c, knorm(inverse(z, spec), exps) / nz);
        if (nz + nzeta > 1e-12) c = std::max(c, knorm(compose(z, zeta, spec), exps) / (nz + nzeta));
    }
    return c;
}

}  // namespace kolmo
