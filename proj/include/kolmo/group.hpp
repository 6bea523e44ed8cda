#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kolmo/matrixcalc.hpp"

namespace kolmo {

struct BlockStructure {
    std::vector<int> sizes;  // m_0, ..., m_kappa

    int kappa() const { return static_cast<int>(sizes.size()) - 1; }
    int total() const;
    /// First coordinate index of level n.
    int offset(int n) const;
    /// Level containing coordinate i.
    int level_of(int i) const;
};

struct OperatorSpec {
    int N = 0;
    int m = 0;
    Matrix A;
    Matrix B;
    BlockStructure blocks;
    double lambda = 0.0;
    double Lambda = 0.0;
    double zero_tol = 1e-14;
    double rank_tol = 1e-10;
    std::string name;
};

/// Builds a spec and fills lambda/Lambda from the eigenvalues of A. Shapes are
/// checked here; the structural hypotheses are checked by validate_structure.
OperatorSpec make_spec(const Matrix& A, const Matrix& B, std::vector<int> blocks, std::string name = "");

struct Exponents {
    std::vector<int> alpha;
    int Q = 0;
    int Qplus2 = 0;

    int N() const { return static_cast<int>(alpha.size()); }
};

struct Point {
    Vector x;
    double t = 0.0;

    Point() = default;
    Point(Vector x_, double t_) : x(std::move(x_)), t(t_) {}

    static Point origin(int n) { return {Vector::Zero(n), 0.0}; }
    int N() const { return static_cast<int>(x.size()); }
};

/// Largest absolute coordinate difference, time included.
double max_abs_diff(const Point& a, const Point& b);

/// Exponents implied by the block sizes alone, without touching B.
Exponents exponents_of(const BlockStructure& blocks);

/// Checks shapes, symmetry and ellipticity of A, the rank of every B_j and the
/// vanishing of the blocks below the subdiagonal.
Exponents validate_structure(const OperatorSpec& spec);

/// Positivity of C(t) = int_0^t E(s) A~ E(s)^T ds.
SpdReport hormander_check(const OperatorSpec& spec, double t);

/// Embeds A in the top-left m x m block of an N x N zero matrix.
Matrix embed_A(const OperatorSpec& spec);

/// E(tau) = exp(-tau B).
Matrix E_of(const Matrix& B, double tau);

Point compose(const Point& z, const Point& zeta, const OperatorSpec& spec);
Point inverse(const Point& z, const OperatorSpec& spec);
/// z^{-1} o zeta, evaluated in one step.
Point relative(const Point& z, const Point& zeta, const OperatorSpec& spec);

Point dilate(double r, const Point& z, const Exponents& exps);
double knorm(const Point& z, const Exponents& exps);
double kdist(const Point& z, const Point& zeta, const OperatorSpec& spec, const Exponents& exps);

/// Blockwise scaled drift: block (p, q) is multiplied by r^{2 + 2(q - p)}.
Matrix scaled_B(const OperatorSpec& spec, double r);
/// B with only its subdiagonal blocks kept.
Matrix principal_B(const OperatorSpec& spec);
bool is_dilation_invariant(const OperatorSpec& spec);
/// Same spec with B replaced by scaled_B(spec, r).
OperatorSpec scaled_spec(const OperatorSpec& spec, double r);

Point compose_r(const Point& z, const Point& zeta, const OperatorSpec& spec, double r);

Vector project_level(const Vector& x, int n, const BlockStructure& blocks);

/// Minimum-norm w in V_0 whose level-n image under B^n equals the level-n part
/// of `target`.
Vector level_map_solve(const OperatorSpec& spec, int n, const Vector& target);

/// Block of B^n mapping level 0 to level n.
Matrix level_map_block(const OperatorSpec& spec, int n);

double estimate_triangle_constant(const OperatorSpec& spec, double radius, int samples, std::uint64_t seed);

// Sampling --------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Uniform sample of the box |x_i| < R^{alpha_i}, |t| < R^2, i.e. Q_R(0).
Point sample_unit_ball(const Exponents& exps, double R, Rng& rng);
/// Sample of Q_R(center) = center o Q_R(0).
Point sample_ball(const OperatorSpec& spec, const Exponents& exps, const Point& center, double R, Rng& rng);
double uniform(Rng& rng, double lo, double hi);

}  // namespace kolmo
