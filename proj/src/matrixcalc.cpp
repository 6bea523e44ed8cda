#include "kolmo/matrixcalc.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "kolmo/error.hpp"

namespace kolmo {

namespace {

constexpr int kTaylorDegree = 18;
constexpr int kMaxSquarings = 1000;

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw Error(ErrorKind::Dimension, std::string(what) + ": expected a non-empty square matrix, got " +
                                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void require_symmetric(const Matrix& m, const char* what) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (asymmetry(m) > 1e-12 * scale) {
        throw Error(ErrorKind::Symmetry, std::string(what) + ": matrix is not symmetric (asymmetry " +
                                             std::to_string(asymmetry(m)) + ")");
    }
}

}  // namespace

double asymmetry(const Matrix& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

Matrix mat_exp(const Matrix& m) {
    require_square(m, "mat_exp");
    if (!all_finite(m)) throw Error(ErrorKind::Scaling, "mat_exp: non-finite entries");

    const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm)) throw Error(ErrorKind::Scaling, "mat_exp: norm overflow");

    // Bring the 1-norm to at most 1/2.
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        if (squarings > kMaxSquarings) throw Error(ErrorKind::Scaling, "mat_exp: norm too large to scale");
    }
    const Matrix x = std::ldexp(1.0, -squarings) * m;
    const auto n = m.rows();
    const Matrix id = Matrix::Identity(n, n);

    // Horner form of sum_k x^k / k!.
    Matrix result = id;
    for (int k = kTaylorDegree; k >= 1; --k) {
        result = id + (x * result) / static_cast<double>(k);
    }
    for (int i = 0; i < squarings; ++i) result = result * result;

    if (!all_finite(result)) throw Error(ErrorKind::Scaling, "mat_exp: overflow while squaring");
    return result;
}

Matrix sqrt_spd(const Matrix& a) {
    require_square(a, "sqrt_spd");
    require_symmetric(a, "sqrt_spd");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
    const Vector& lambda = solver.eigenvalues();
    if (lambda.minCoeff() <= 0.0) {
        throw Error(ErrorKind::Definiteness,
                    "sqrt_spd: matrix is not positive definite (min eigenvalue " +
                        std::to_string(lambda.minCoeff()) + ")");
    }
    const Matrix& v = solver.eigenvectors();
    Matrix s = v * lambda.cwiseSqrt().asDiagonal() * v.transpose();
    return 0.5 * (s + s.transpose());
}

SpdReport spd_min_eigen(const Matrix& s, double tol) {
    require_square(s, "spd_min_eigen");
    require_symmetric(s, "spd_min_eigen");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    SpdReport report;
    report.min_eigenvalue = solver.eigenvalues().minCoeff();
    report.tolerance = tol;
    report.is_spd = report.min_eigenvalue > tol;
    return report;
}

QuadratureRule gauss_legendre(int order) {
    if (order < 1) throw Error(ErrorKind::Domain, "gauss_legendre: order must be positive");
    QuadratureRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const int half = (order + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev-like initial guess, then Newton on P_n.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= order; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (order == 1) {
                p1 = x;
                p0 = 1.0;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Recompute derivative at the converged node.
        double p0 = 1.0;
        double p1 = x;
        for (int k = 2; k <= order; ++k) {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = order * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[order - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[order - 1 - i] = w;
    }
    if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
    return rule;
}

QuadratureRule composite_rule(double a, double b, int panels, int order) {
    if (panels < 1) throw Error(ErrorKind::Domain, "composite_rule: panels must be positive");
    const QuadratureRule base = gauss_legendre(order);
    QuadratureRule rule;
    rule.nodes.reserve(static_cast<size_t>(panels) * order);
    rule.weights.reserve(static_cast<size_t>(panels) * order);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h;
        for (int k = 0; k < order; ++k) {
            rule.nodes.push_back(mid + 0.5 * h * base.nodes[k]);
            rule.weights.push_back(0.5 * h * base.weights[k]);
        }
    }
    return rule;
}

double integrate(const std::function<double(double)>& f, double a, double b, int panels, int order) {
    const QuadratureRule rule = composite_rule(a, b, panels, order);
    double sum = 0.0;
    for (size_t k = 0; k < rule.nodes.size(); ++k) sum += rule.weights[k] * f(rule.nodes[k]);
    return sum;
}

Matrix integrate_matrix(const std::function<Matrix(double)>& integrand, double t, int panels, double tol) {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorKind::Domain, "integrate_matrix: t must be positive");
    if (panels < 1) throw Error(ErrorKind::Domain, "integrate_matrix: panels must be positive");

    auto run = [&](int p) {
        const QuadratureRule rule = composite_rule(0.0, t, p);
        Matrix sum;
        for (size_t k = 0; k < rule.nodes.size(); ++k) {
            Matrix value = integrand(rule.nodes[k]);
            if (k == 0) {
                sum = rule.weights[k] * value;
            } else {
                if (value.rows() != sum.rows() || value.cols() != sum.cols()) {
                    throw Error(ErrorKind::Dimension, "integrate_matrix: integrand changed shape");
                }
                sum += rule.weights[k] * value;
            }
        }
        return sum;
    };

    const Matrix coarse = run(panels);
    const Matrix fine = run(2 * panels);
    const double scale = std::max(1.0, fine.cwiseAbs().maxCoeff());
    const double change = (fine - coarse).cwiseAbs().maxCoeff();
    if (!(change <= tol * scale)) {
        throw Error(ErrorKind::Accuracy, "integrate_matrix: panel doubling changed the result by " +
                                             std::to_string(change));
    }
    return fine;
}

void for_each_tensor_node(const std::vector<QuadratureRule>& rules,
                          const std::function<void(const Vector&, double)>& visit) {
    const size_t dim = rules.size();
    if (dim == 0) return;
    for (const auto& r : rules) {
        if (r.nodes.empty()) return;
    }
    std::vector<size_t> index(dim, 0);
    Vector point(static_cast<Eigen::Index>(dim));
    while (true) {
        double weight = 1.0;
        for (size_t d = 0; d < dim; ++d) {
            point[static_cast<Eigen::Index>(d)] = rules[d].nodes[index[d]];
            weight *= rules[d].weights[index[d]];
        }
        visit(point, weight);
        size_t d = 0;
        while (d < dim) {
            if (++index[d] < rules[d].nodes.size()) break;
            index[d] = 0;
            ++d;
        }
        if (d == dim) break;
    }
}

}  // namespace kolmo
