#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pathfolio/simplex.hpp"
#include "pathfolio/wealth.hpp"

namespace pathfolio {

/// Per-step family returns along one grid: y(i, k) = theta^(k) . dx / x for
/// the increment ending at t_i. The wealth of the constant mixture
/// sum_k b_k theta^(k) is exactly prod_i (1 + b . y_i), so one table serves
/// every b at once. Child allocations are optionally recorded (row-major
/// k*d + j) for reconstructing aggregated allocations.
struct ReturnTable {
    Partition partition;
    Mat y;           // grid x m
    Mat thetas;      // grid x (m*d), empty unless recorded
    Eigen::Index d = 0;
};

inline ReturnTable build_return_table(const std::vector<const Strategy*>& strategies,
                                      const CadlagPath& path, const Partition& p,
                                      bool record_thetas = false) {
    if (strategies.empty()) throw InvalidParams("return table: no strategies");
    const Eigen::Index m = static_cast<Eigen::Index>(strategies.size());
    const Eigen::Index d = path.dim();
    std::vector<StrategyPtr> kids;
    kids.reserve(strategies.size());
    for (const auto* s : strategies) {
        if (!s) throw InvalidParams("return table: null strategy");
        kids.push_back(s->clone());
        kids.back()->start(path);
    }
    const auto& ts = p.times();
    ReturnTable out{p, Mat(static_cast<Eigen::Index>(ts.size()), m), Mat(), d};
    if (record_thetas) out.thetas.resize(static_cast<Eigen::Index>(ts.size()), m * d);
    Vec x_prev = path.x0();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double t = ts[i];
        Vec x_now = path.value(t);
        const Vec u = (x_now - x_prev).cwiseQuotient(x_prev);
        for (Eigen::Index k = 0; k < m; ++k) {
            Vec theta = kids[static_cast<std::size_t>(k)]->allocate(t, x_prev);
            out.y(static_cast<Eigen::Index>(i), k) = theta.dot(u);
            if (record_thetas)
                out.thetas.block(static_cast<Eigen::Index>(i), k * d, 1, d) = theta.transpose();
        }
        for (auto& c : kids) c->settle(t, x_prev, x_now);
        x_prev = std::move(x_now);
    }
    return out;
}

/// ln W(b) = sum_i ln(1 + b . y_i); concave on the simplex and on a small
/// neighborhood of it.
inline double log_wealth_of_b(const ReturnTable& table, const Vec& b) {
    if (b.size() != table.y.cols()) throw DimensionMismatch("log_wealth_of_b: |b| != m");
    const Vec z = table.y * b;
    if ((z.array() <= -1.0).any()) {
        Eigen::Index bad = 0;
        z.minCoeff(&bad);
        throw Ruin(table.partition.times()[static_cast<std::size_t>(bad)]);
    }
    detail::Kahan acc;
    for (Eigen::Index i = 0; i < z.size(); ++i) acc.add(std::log1p(z(i)));
    return acc.value();
}

/// Callable form: one table evaluation per b.
class LogWealth {
public:
    LogWealth(const std::vector<const Strategy*>& strategies, const CadlagPath& path,
              const Partition& p)
        : table_(build_return_table(strategies, path, p)) {}
    explicit LogWealth(ReturnTable table) : table_(std::move(table)) {}
    double operator()(const Vec& b) const { return log_wealth_of_b(table_, b); }
    const ReturnTable& table() const { return table_; }

private:
    ReturnTable table_;
};

/// Gram statistics of the family: Sigma(T) and the return vector R_T,
/// discrete sums over the grid.
struct GramStats {
    Mat sigma;
    Vec r;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::vector<double> level_deviation;
    bool converged = true;
};

inline GramStats gram_from_table(const ReturnTable& table) {
    GramStats g;
    g.sigma = table.y.transpose() * table.y;
    g.r = table.y.colwise().sum();
    Eigen::SelfAdjointEigenSolver<Mat> es(g.sigma);
    g.lambda_min = es.eigenvalues().minCoeff();
    g.lambda_max = es.eigenvalues().maxCoeff();
    return g;
}

/// Ladder version with an omega precondition and stabilization diagnostics.
inline GramStats gram(const std::vector<const Strategy*>& strategies, const CadlagPath& path,
                      const RefinementLadder& ladder, const OmegaConstraint& omega,
                      double tolerance = kLadderRelTol) {
    const OmegaReport om = check_omega(path, omega);
    if (!om.ok)
        throw OmegaViolation("gram: path violates omega bounds (worst down " +
                             std::to_string(om.worst_down) + ", worst up " +
                             std::to_string(om.worst_up) + ")");
    const auto& knots = path.knot_times();
    GramStats g = gram_from_table(
        build_return_table(strategies, path, ladder.levels().front().refined_with(knots)));
    for (std::size_t l = 1; l < ladder.levels().size(); ++l) {
        GramStats fine = gram_from_table(
            build_return_table(strategies, path, ladder.levels()[l].refined_with(knots)));
        const double scale = std::max(fine.sigma.norm(), 1e-300);
        double dev = (fine.sigma - g.sigma).norm() / scale;
        if (fine.r.norm() > 0.0) dev = std::max(dev, (fine.r - g.r).norm() / fine.r.norm());
        auto devs = std::move(g.level_deviation);
        devs.push_back(dev);
        g = std::move(fine);
        g.level_deviation = std::move(devs);
        if (g.level_deviation.back() <= tolerance) break;
    }
    g.converged = g.level_deviation.empty() || g.level_deviation.back() <= tolerance;
    return g;
}

/// Maximizer of the concave map b -> ln W(b) over {b >= 0, sum b <= 1}.
struct MaximizeResult {
    Vec b_star;
    double log_w_star = 0.0;
    double w_star = 1.0;
    bool interior = false;
};

namespace detail {

inline Vec fd_gradient(const ReturnTable& table, const Vec& b) {
    const Eigen::Index m = b.size();
    Vec g(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double eps = 1e-6 * std::max(std::abs(b(k)), 1.0);
        Vec bp = b, bm = b;
        bp(k) += eps;
        bm(k) -= eps;
        g(k) = (log_wealth_of_b(table, bp) - log_wealth_of_b(table, bm)) / (2.0 * eps);
    }
    return g;
}

}  // namespace detail

inline MaximizeResult maximize_b(const ReturnTable& table, std::uint64_t seed = 7,
                                 int max_iters = 300) {
    const Eigen::Index m = table.y.cols();
    auto lex_less = [](const Vec& a, const Vec& b) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (a(i) < b(i) - 1e-12) return true;
            if (a(i) > b(i) + 1e-12) return false;
        }
        return false;
    };

    std::vector<Vec> starts;
    starts.push_back(Vec::Constant(m, 1.0 / static_cast<double>(m + 1)));
    for (Eigen::Index k = 0; k < m; ++k) {
        Vec v = Vec::Zero(m);
        v(k) = 0.5;
        starts.push_back(v);
    }
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 3; ++i) starts.push_back(uniform_subsimplex(m, rng));

    MaximizeResult best;
    best.b_star = Vec::Zero(m);
    best.log_w_star = -std::numeric_limits<double>::infinity();
    for (const Vec& s : starts) {
        Vec b = project_subsimplex(s);
        double f = log_wealth_of_b(table, b);
        double step = 1.0;
        for (int it = 0; it < max_iters; ++it) {
            const Vec g = detail::fd_gradient(table, b);
            bool moved = false;
            for (int bt = 0; bt < 40; ++bt) {
                Vec cand = project_subsimplex(b + step * g);
                double fc;
                try {
                    fc = log_wealth_of_b(table, cand);
                } catch (const Ruin&) {
                    step *= 0.5;
                    continue;
                }
                if (fc > f + 1e-15) {
                    const double moved_by = (cand - b).norm();
                    b = std::move(cand);
                    f = fc;
                    moved = true;
                    step *= 1.5;
                    if (moved_by < 1e-12) moved = false;
                    break;
                }
                step *= 0.5;
            }
            if (!moved || step < 1e-16) break;
        }
        if (f > best.log_w_star + 1e-12 ||
            (f > best.log_w_star - 1e-12 && lex_less(b, best.b_star))) {
            best.log_w_star = f;
            best.b_star = b;
        }
    }
    best.w_star = std::exp(best.log_w_star);
    best.interior =
        (best.b_star.array() > 1e-6).all() && 1.0 - best.b_star.sum() > 1e-6;
    return best;
}

inline MaximizeResult maximize_b(const std::vector<const Strategy*>& strategies,
                                 const CadlagPath& path, const Partition& p,
                                 std::uint64_t seed = 7) {
    return maximize_b(build_return_table(strategies, path, p), seed);
}

/// Simplex quadrature for the universal mixture.
struct Quadrature {
    enum class Kind { mc, grid };
    Kind kind = Kind::mc;
    std::size_t nodes = 4096;   // mc
    std::uint64_t seed = 1;     // mc
    double resolution = 0.05;   // grid, m <= 3
};

inline Mat quadrature_nodes(const Quadrature& q, Eigen::Index m) {
    if (q.kind == Quadrature::Kind::mc) {
        if (q.nodes == 0) throw InvalidParams("quadrature: need at least one node");
        std::mt19937_64 rng(q.seed);
        Mat nodes(static_cast<Eigen::Index>(q.nodes), m);
        for (std::size_t j = 0; j < q.nodes; ++j)
            nodes.row(static_cast<Eigen::Index>(j)) = uniform_subsimplex(m, rng).transpose();
        return nodes;
    }
    if (m > 3) throw InvalidParams("grid quadrature supports m <= 3 only");
    if (!(q.resolution > 0.0 && q.resolution < 1.0))
        throw InvalidParams("grid quadrature: resolution must be in (0,1)");
    const int n = static_cast<int>(std::floor(1.0 / q.resolution));
    std::vector<Vec> pts;
    auto push = [&](std::initializer_list<double> c) {
        Vec b(m);
        Eigen::Index i = 0;
        double sum = 0.0;
        for (double v : c) {
            b(i++) = v;
            sum += v;
        }
        if (sum <= 1.0) pts.push_back(b);
    };
    if (m == 1) {
        for (int i = 0; i < n; ++i) push({(i + 0.5) * q.resolution});
    } else if (m == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                push({(i + 0.5) * q.resolution, (j + 0.5) * q.resolution});
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    push({(i + 0.5) * q.resolution, (j + 0.5) * q.resolution,
                          (k + 0.5) * q.resolution});
    }
    if (pts.empty()) throw InvalidParams("grid quadrature produced no nodes");
    Mat nodes(static_cast<Eigen::Index>(pts.size()), m);
    for (std::size_t j = 0; j < pts.size(); ++j)
        nodes.row(static_cast<Eigen::Index>(j)) = pts[j].transpose();
    return nodes;
}

/// Gaussian-ratio estimate with standard error, plus the cross-checking
/// second estimator.
struct GaussianRatio {
    double value = 1.0;       // direct simplex average of the Gaussian bump
    double stderr_ = 0.0;
    double alt_value = 1.0;   // prefactor times Gaussian measure of the simplex
    double alt_stderr = 0.0;
};

/// m! (1-delta)^m (2 pi)^{m/2} / sqrt(det Sigma) times the Gaussian measure
/// of the sub-simplex around b*, equivalently the plain simplex average of
/// exp(-(b-b*)' Sigma (b-b*) / (2 (1-delta)^2)). Both are estimated by
/// seeded Monte Carlo.
inline GaussianRatio gaussian_ratio(const GramStats& gram, const Vec& b_star, double delta,
                                    std::size_t samples = 1 << 17, std::uint64_t seed = 11) {
    const Eigen::Index m = gram.sigma.rows();
    if (b_star.size() != m) throw DimensionMismatch("gaussian_ratio: |b*| != m");
    if (!(gram.lambda_max > 0.0) || gram.lambda_min / gram.lambda_max < 1e-10)
        throw SingularSigma("gaussian_ratio: Sigma is numerically singular");
    if (!(1.0 - delta > 0.0)) throw InvalidParams("gaussian_ratio: need delta < 1");

    const double scale = 1.0 - delta;
    std::mt19937_64 rng(seed);
    GaussianRatio out;

    // direct estimator: uniform nodes on the simplex, average the bump
    {
        detail::Kahan acc, acc2;
        for (std::size_t i = 0; i < samples; ++i) {
            const Vec b = uniform_subsimplex(m, rng);
            const Vec dbv = b - b_star;
            const double q = dbv.dot(gram.sigma * dbv);
            const double f = std::exp(-q / (2.0 * scale * scale));
            acc.add(f);
            acc2.add(f * f);
        }
        const double n = static_cast<double>(samples);
        out.value = acc.value() / n;
        const double var = std::max(0.0, acc2.value() / n - out.value * out.value);
        out.stderr_ = std::sqrt(var / n);
    }

    // membership estimator: sample the Gaussian, count simplex hits
    {
        Eigen::SelfAdjointEigenSolver<Mat> es(gram.sigma);
        const Mat root_inv = es.eigenvectors() *
                             es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                             es.eigenvectors().transpose();
        const double det = es.eigenvalues().prod();
        double prefactor = std::pow(2.0 * M_PI, 0.5 * m) * std::pow(scale, m) / std::sqrt(det);
        for (int k = 2; k <= m; ++k) prefactor *= static_cast<double>(k);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::size_t hits = 0;
        Vec z(m);
        for (std::size_t i = 0; i < samples; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) z(j) = normal(rng);
            const Vec b = b_star + scale * (root_inv * z);
            if ((b.array() >= 0.0).all() && b.sum() <= 1.0) ++hits;
        }
        const double n = static_cast<double>(samples);
        const double phat = static_cast<double>(hits) / n;
        out.alt_value = prefactor * phat;
        out.alt_stderr = prefactor * std::sqrt(std::max(0.0, phat * (1.0 - phat)) / n);
    }
    return out;
}

/// Universal mixture over the simplex: all node wealths advance in one pass
/// over the grid (structure-of-arrays), the aggregate allocation is the
/// wealth-weighted node average, and W_hat is the plain node average.
struct UniversalResult {
    explicit UniversalResult(Partition p) : partition(std::move(p)) {}

    Partition partition;
    std::vector<double> w_hat;       // node-average wealth per grid point
    std::vector<double> w_node_max;  // running max over nodes (W* proxy curve)
    Mat b_bar;                       // grid x m wealth-weighted average node
    Mat theta_hat;                   // grid x d aggregated allocation
    Vec b_star;
    double w_star = 1.0;
    double log_w_star = 0.0;
    bool interior = false;
    double ratio = 1.0;              // W_hat(T) / W*
    double mc_stderr = 0.0;          // stderr of terminal W_hat (mc only)
    double bracket_lo = std::numeric_limits<double>::quiet_NaN();
    double bracket_hi = std::numeric_limits<double>::quiet_NaN();
    double bracket_lo_err = 0.0;
    double bracket_hi_err = 0.0;
    GramStats gram;
};

inline UniversalResult universal_portfolio(const std::vector<const Strategy*>& strategies,
                                           const CadlagPath& path, const Partition& p,
                                           const Quadrature& q,
                                           const OmegaConstraint& omega = {0.3, 0.3},
                                           std::size_t ratio_samples = 1 << 16) {
    const Eigen::Index m = static_cast<Eigen::Index>(strategies.size());
    ReturnTable table = build_return_table(strategies, path, p, true);
    const Mat nodes = quadrature_nodes(q, m);
    const Eigen::Index n = nodes.rows();
    const Eigen::Index d = path.dim();
    const auto& ts = p.times();

    UniversalResult out(p);
    out.w_hat.resize(ts.size());
    out.w_node_max.resize(ts.size());
    out.b_bar.resize(static_cast<Eigen::Index>(ts.size()), m);
    out.theta_hat.resize(static_cast<Eigen::Index>(ts.size()), d);

    Vec w = Vec::Ones(n);
    double log_offset = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Vec z = nodes * table.y.row(static_cast<Eigen::Index>(i)).transpose();
        for (Eigen::Index j = 0; j < n; ++j) {
            const double factor = 1.0 + z(j);
            if (!(factor > 0.0)) throw Ruin(ts[i], "quadrature node " + std::to_string(j));
            w(j) *= factor;
        }
        const double wsum = w.sum();
        out.w_hat[i] = std::exp(log_offset) * wsum / static_cast<double>(n);
        out.w_node_max[i] = std::exp(log_offset) * w.maxCoeff();
        const Vec bbar = (nodes.transpose() * w) / wsum;
        out.b_bar.row(static_cast<Eigen::Index>(i)) = bbar.transpose();
        Vec theta = Vec::Zero(d);
        for (Eigen::Index k = 0; k < m; ++k)
            theta += bbar(k) *
                     table.thetas.block(static_cast<Eigen::Index>(i), k * d, 1, d).transpose();
        out.theta_hat.row(static_cast<Eigen::Index>(i)) = theta.transpose();
        // keep node wealths in a safe floating range
        if ((i & 1023u) == 1023u) {
            const double c = w.maxCoeff();
            if (c > 1e100 || c < 1e-100) {
                w /= c;
                log_offset += std::log(c);
            }
        }
    }
    if (q.kind == Quadrature::Kind::mc && n > 1) {
        const double mean = w.mean();
        const double var = (w.array() - mean).square().sum() / static_cast<double>(n - 1);
        out.mc_stderr = std::exp(log_offset) * std::sqrt(var / static_cast<double>(n));
    }

    const MaximizeResult mx = maximize_b(table);
    out.b_star = mx.b_star;
    out.w_star = mx.w_star;
    out.log_w_star = mx.log_w_star;
    out.interior = mx.interior;
    out.ratio = out.w_hat.back() / mx.w_star;
    out.gram = gram_from_table(table);
    try {
        const GaussianRatio lo = gaussian_ratio(out.gram, mx.b_star, omega.delta_minus,
                                                ratio_samples, q.seed + 101);
        const GaussianRatio hi = gaussian_ratio(out.gram, mx.b_star, -omega.delta_plus,
                                                ratio_samples, q.seed + 202);
        out.bracket_lo = lo.value;
        out.bracket_lo_err = lo.stderr_;
        out.bracket_hi = hi.value;
        out.bracket_hi_err = hi.stderr_;
    } catch (const SingularSigma&) {
        // degenerate family: leave the bracket unset
    }
    return out;
}

/// Verdict of the exact-ratio comparison on a computed result.
struct RatioVerdict {
    double ratio = 1.0;
    double lower = 1.0, upper = 1.0;
    double lower_err = 0.0, upper_err = 0.0;
    bool bracket_ok = true;
    bool checked_continuous = false;
    double continuous_value = 1.0;
    double continuous_rel_err = 0.0;
    bool continuous_ok = true;
};

/// Bracket check: gaussian_ratio at delta = delta_minus is the lower end and
/// at delta = -delta_plus the upper end (shrinking (1-delta) shrinks the
/// bump). For continuous paths the delta = 0 value is compared directly.
inline RatioVerdict exact_ratio_check(const UniversalResult& result, const GramStats& gram,
                                      double delta_minus, double delta_plus,
                                      double continuous_tol = 0.05,
                                      std::size_t samples = 1 << 17, std::uint64_t seed = 17,
                                      bool path_is_continuous = false) {
    RatioVerdict v;
    v.ratio = result.w_hat.back() / result.w_star;
    const GaussianRatio lo = gaussian_ratio(gram, result.b_star, delta_minus, samples, seed);
    const GaussianRatio hi = gaussian_ratio(gram, result.b_star, -delta_plus, samples, seed + 1);
    v.lower = lo.value;
    v.lower_err = lo.stderr_;
    v.upper = hi.value;
    v.upper_err = hi.stderr_;
    const double mc = 3.0 * (lo.stderr_ + hi.stderr_ + result.mc_stderr / result.w_star);
    v.bracket_ok = v.ratio >= v.lower - mc && v.ratio <= v.upper + mc;
    if (path_is_continuous) {
        const GaussianRatio mid = gaussian_ratio(gram, result.b_star, 0.0, samples, seed + 2);
        v.checked_continuous = true;
        v.continuous_value = mid.value;
        v.continuous_rel_err = std::abs(v.ratio / mid.value - 1.0);
        v.continuous_ok = v.continuous_rel_err <= continuous_tol;
    }
    return v;
}

/// One asymptotics row per horizon: observed log tracking gap, the predicted
/// 1/2 ln det Sigma - ln(m! (2 pi)^{m/2}), their ratio, and the decayed rate.
struct AsymptoticsRow {
    double t = 0.0;
    double log_ratio = 0.0;   // ln(W*/W_hat)
    double predicted = 0.0;
    double ratio = 0.0;       // log_ratio / predicted
    double rate = 0.0;        // log_ratio / t
    bool interior = false;
};

inline std::vector<AsymptoticsRow> asymptotics_experiment(
    const std::vector<const Strategy*>& strategies, const CadlagPath& path,
    const std::vector<double>& horizons, const Quadrature& q) {
    const Eigen::Index m = static_cast<Eigen::Index>(strategies.size());
    std::vector<AsymptoticsRow> rows;
    for (double t : horizons) {
        if (!(t > 0.0 && t <= path.horizon()))
            throw InvalidHorizon("asymptotics: horizons must lie in (0, path horizon]");
        const CadlagPath stopped = path.stop(t);
        const Partition p = Partition(stopped.knot_times().size() >= 2
                                          ? stopped.knot_times()
                                          : std::vector<double>{0.0, t});
        const UniversalResult res = universal_portfolio(strategies, stopped, p, q);
        AsymptoticsRow row;
        row.t = t;
        row.log_ratio = res.log_w_star - std::log(res.w_hat.back());
        double log_mfact = 0.0;
        for (int k = 2; k <= m; ++k) log_mfact += std::log(static_cast<double>(k));
        Eigen::SelfAdjointEigenSolver<Mat> es(res.gram.sigma);
        row.predicted = 0.5 * es.eigenvalues().array().log().sum() - log_mfact -
                        0.5 * static_cast<double>(m) * std::log(2.0 * M_PI);
        row.ratio = row.predicted != 0.0 ? row.log_ratio / row.predicted : 0.0;
        row.rate = row.log_ratio / t;
        row.interior = res.interior;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pathfolio
