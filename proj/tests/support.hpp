#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "kolmo/group.hpp"
#include "kolmo/spec_io.hpp"

namespace kolmo::testing {

inline double gauss(Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    return nd(rng);
}

inline Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int k = 0; k < c; ++k) m(i, k) = scale * gauss(rng);
    return m;
}

inline Matrix random_spd(int n, Rng& rng) {
    const Matrix g = random_matrix(n, n, rng, 0.5);
    return g * g.transpose() + Matrix::Identity(n, n);
}

/// Random spec satisfying the block hypotheses. With `invariant` the starred
/// blocks are zero.
inline OperatorSpec random_spec(Rng& rng, bool invariant, int max_levels = 3) {
    std::vector<int> sizes;
    const int levels = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_levels));
    int prev = 1 + static_cast<int>(rng() % 2);
    for (int l = 0; l < levels; ++l) {
        const int s = l == 0 ? prev : 1 + static_cast<int>(rng() % static_cast<unsigned>(prev));
        sizes.push_back(s);
        prev = s;
    }
    BlockStructure bs{sizes};
    const int n = bs.total();
    Matrix b = Matrix::Zero(n, n);
    for (int p = 0; p <= bs.kappa(); ++p) {
        for (int q = std::max(0, p - 1); q <= bs.kappa(); ++q) {
            const int rows = sizes[static_cast<size_t>(p)];
            const int cols = sizes[static_cast<size_t>(q)];
            if (q == p - 1) {
                Matrix blk = random_matrix(rows, cols, rng);
                blk.leftCols(rows) += 2.0 * Matrix::Identity(rows, rows);
                b.block(bs.offset(p), bs.offset(q), rows, cols) = blk;
            } else if (!invariant) {
                b.block(bs.offset(p), bs.offset(q), rows, cols) = random_matrix(rows, cols, rng, 0.4);
            }
        }
    }
    return make_spec(random_spd(sizes[0], rng), b, sizes, invariant ? "random-b0" : "random");
}

inline Point random_point(int n, Rng& rng, double scale = 1.0) {
    Point z = Point::origin(n);
    for (int i = 0; i < n; ++i) z.x[i] = uniform(rng, -scale, scale);
    z.t = uniform(rng, -scale, scale);
    return z;
}

/// Closed-form C(t) of the Kolmogorov operator.
inline Matrix kolmogorov_C(double t) {
    Matrix c(2, 2);
    c << t, t * t / 2.0, t * t / 2.0, t * t * t / 3.0;
    return c;
}

inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace kolmo::testing
