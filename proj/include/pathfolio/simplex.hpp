#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "pathfolio/path.hpp"

namespace pathfolio {

/// |Delta_m| = 1/m! for the sub-simplex {b >= 0, sum b <= 1}.
inline double simplex_volume(int m) {
    double v = 1.0;
    for (int k = 2; k <= m; ++k) v /= static_cast<double>(k);
    return v;
}

/// Uniform sample on {b >= 0, sum b <= 1} via exponential spacings: m+1
/// exponentials normalized to the standard simplex, last coordinate dropped.
template <class Rng>
Vec uniform_subsimplex(Eigen::Index m, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec e(m + 1);
    for (Eigen::Index i = 0; i <= m; ++i) {
        double u;
        do { u = unif(rng); } while (u <= 0.0);
        e(i) = -std::log(u);
    }
    return e.head(m) / e.sum();
}

/// Uniform (Dirichlet(1,...,1)) sample on the standard simplex {sum b = 1}.
template <class Rng>
Vec uniform_simplex(Eigen::Index m, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec e(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double u;
        do { u = unif(rng); } while (u <= 0.0);
        e(i) = -std::log(u);
    }
    return e / e.sum();
}

/// Euclidean projection onto the standard simplex {b >= 0, sum b = s}.
inline Vec project_simplex(const Vec& v, double s = 1.0) {
    const Eigen::Index m = v.size();
    std::vector<double> u(v.data(), v.data() + m);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, tau = 0.0;
    int rho = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        css += u[static_cast<std::size_t>(i)];
        const double cand = (css - s) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] > cand) {
            tau = cand;
            rho = static_cast<int>(i) + 1;
        }
    }
    (void)rho;
    return (v.array() - tau).max(0.0);
}

/// Euclidean projection onto the sub-simplex {b >= 0, sum b <= 1}.
inline Vec project_subsimplex(const Vec& v) {
    Vec clipped = v.array().max(0.0);
    if (clipped.sum() <= 1.0) return clipped;
    return project_simplex(v, 1.0);
}

}  // namespace pathfolio
