#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace kolmo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SpdReport {
    double min_eigenvalue = 0.0;
    bool is_spd = false;
    double tolerance = 0.0;
};

/// exp(M) by scaling and squaring around a fixed degree-18 Taylor core.
/// Nilpotent inputs are reproduced exactly up to rounding because the series
/// terminates and the squaring steps only multiply by powers of two.
Matrix mat_exp(const Matrix& m);

/// Symmetric square root of a symmetric positive definite matrix.
Matrix sqrt_spd(const Matrix& a);

/// Smallest eigenvalue of a symmetric matrix; is_spd iff it exceeds `tol`.
SpdReport spd_min_eigen(const Matrix& s, double tol = 0.0);

// Quadrature ---------------------------------------------------------------

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
QuadratureRule gauss_legendre(int order);

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels.
QuadratureRule composite_rule(double a, double b, int panels, int order = 8);

double integrate(const std::function<double(double)>& f, double a, double b, int panels,
                 int order = 8);

inline constexpr int kDefaultPanels = 16;
inline constexpr double kQuadratureTol = 1e-10;

/// Entry-wise composite Gauss-Legendre integral of s -> M(s) over [0, t].
/// The result at 2*panels is returned after checking that it differs from the
/// `panels` result by less than tol * max(1, |result|).
Matrix integrate_matrix(const std::function<Matrix(double)>& integrand, double t,
                        int panels = kDefaultPanels, double tol = kQuadratureTol);

/// Visits every node of the tensor product of the given 1-D rules.
void for_each_tensor_node(const std::vector<QuadratureRule>& rules,
                          const std::function<void(const Vector&, double)>& visit);

/// Largest absolute entry of m - m^T.
double asymmetry(const Matrix& m);

}  // namespace kolmo
