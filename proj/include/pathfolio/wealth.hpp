#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pathfolio/strategy.hpp"

namespace pathfolio {

namespace detail {

/// Kahan compensated accumulator.
struct Kahan {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

}  // namespace detail

/// Self-financing wealth along a grid. values[i] = V(t_i); V(t_0 -) = xi.
struct WealthCurve {
    Partition partition;
    std::vector<double> values;
    double xi = 1.0;
    // ladder diagnostics (empty for single-level runs)
    std::vector<double> level_deviation;
    bool converged = true;
    double tolerance = 0.0;
};

namespace detail {

/// One pass of the product recursion. The increment over (t_i, t_{i+1}] is
/// priced with the allocation evaluated at the right-endpoint time on the
/// pre-increment prefix: theta(t_{i+1}, .) with price argument x(t_i), the
/// last value the grid has revealed. On step paths whose jumps sit on the
/// grid this is exactly theta(t_{i+1}, x_{t_{i+1}-}), reproducing the
/// continuous-time jump rule; on continuous paths it keeps the weights
/// uncorrelated with the increment, so the product converges to the
/// pathwise exponential without a quadratic-variation bias.
/// Log-space accumulation, factors checked in linear space.
inline std::vector<double> wealth_values(Strategy& s, const CadlagPath& path,
                                         const Partition& p, double xi,
                                         std::vector<Vec>* thetas_left = nullptr,
                                         std::vector<Vec>* thetas_right = nullptr) {
    if (!(xi > 0.0)) throw InvalidParams("initial wealth must be > 0");
    s.start(path);
    const auto& ts = p.times();
    std::vector<double> vals(ts.size());
    Kahan logw;
    const double logxi = std::log(xi);
    Vec x_prev = path.x0();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double t = ts[i];
        Vec theta = s.allocate(t, x_prev);
        Vec x_now = path.value(t);
        const double factor = 1.0 + theta.dot((x_now - x_prev).cwiseQuotient(x_prev));
        if (!(factor > 0.0)) throw Ruin(t);
        logw.add(std::log(factor));
        s.settle(t, x_prev, x_now);
        if (thetas_left) thetas_left->push_back(std::move(theta));
        if (thetas_right) thetas_right->push_back(s.allocate(t, x_now));
        vals[i] = std::exp(logxi + logw.value());
        x_prev = std::move(x_now);
    }
    return vals;
}

/// Deviation between a coarse and a fine curve at the coarse grid times
/// (fine grid must contain the coarse one).
inline double curve_deviation(const Partition& coarse, const std::vector<double>& cv,
                              const Partition& fine, const std::vector<double>& fv,
                              bool relative) {
    const auto& ct = coarse.times();
    const auto& ft = fine.times();
    double worst = 0.0;
    for (std::size_t i = 0; i < ct.size(); ++i) {
        auto it = std::upper_bound(ft.begin(), ft.end(), ct[i]);
        const std::size_t j = static_cast<std::size_t>(it - ft.begin()) - 1;
        double d = std::abs(fv[j] - cv[i]);
        if (relative) d /= std::abs(cv[i]);
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace detail

/// Discrete product recursion on one grid.
inline WealthCurve wealth_discrete(const Strategy& strategy, const CadlagPath& path,
                                   const Partition& p, double xi = 1.0) {
    StrategyPtr s = strategy.clone();
    WealthCurve out{p, detail::wealth_values(*s, path, p, xi), xi, {}, true, 0.0};
    return out;
}

/// Limit along a refinement ladder. Every level is merged with the path's
/// knot times so jumps are resolved at all levels; returns the finest level
/// computed, with per-level max relative deviations. Non-convergence is a
/// flag, not an error.
inline WealthCurve wealth_limit(const Strategy& strategy, const CadlagPath& path,
                                const RefinementLadder& ladder, double tolerance = kLadderRelTol,
                                double xi = 1.0) {
    const auto& knots = path.knot_times();
    Partition grid = ladder.levels().front().refined_with(knots);
    StrategyPtr s = strategy.clone();
    std::vector<double> vals = detail::wealth_values(*s, path, grid, xi);

    std::vector<double> dev;
    for (std::size_t l = 1; l < ladder.levels().size(); ++l) {
        Partition fine = ladder.levels()[l].refined_with(knots);
        StrategyPtr sl = strategy.clone();
        std::vector<double> fv = detail::wealth_values(*sl, path, fine, xi);
        dev.push_back(detail::curve_deviation(grid, vals, fine, fv, true));
        grid = std::move(fine);
        vals = std::move(fv);
        if (dev.back() <= tolerance) break;
    }
    const bool converged = dev.empty() || dev.back() <= tolerance;
    return WealthCurve{std::move(grid), std::move(vals), xi, std::move(dev), converged, tolerance};
}

/// Share counts and cash holding implementing the wealth curve:
/// phi = (theta~ / x) V, psi = (1 - sum theta~) V, with theta~ the
/// right-continuous (post-jump) allocation at each grid point.
struct ImplementationCurves {
    Partition partition;
    Mat phi;               // grid x d share counts
    std::vector<double> psi;
    double max_identity_error = 0.0;  // |phi.x + psi - V| / V
};

inline ImplementationCurves implementation(const Strategy& strategy, const WealthCurve& wealth,
                                           const CadlagPath& path) {
    StrategyPtr s = strategy.clone();
    std::vector<Vec> thetas;
    std::vector<double> vals =
        detail::wealth_values(*s, path, wealth.partition, wealth.xi, nullptr, &thetas);
    const auto& ts = wealth.partition.times();
    ImplementationCurves out{wealth.partition, Mat(ts.size(), path.dim()),
                             std::vector<double>(ts.size()), 0.0};
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Vec x = path.value(ts[i]);
        const double v = vals[i];
        out.phi.row(static_cast<Eigen::Index>(i)) =
            thetas[i].cwiseQuotient(x).transpose() * v;
        out.psi[i] = (1.0 - thetas[i].sum()) * v;
        const double err =
            std::abs(out.phi.row(static_cast<Eigen::Index>(i)).dot(x) + out.psi[i] - v) / v;
        out.max_identity_error = std::max(out.max_identity_error, err);
    }
    return out;
}

/// Discrete self-financing diagnostics.
struct SelfFinancingReport {
    double max_rebalancing = 0.0;  // |delta phi~ . x + delta psi~| / V
    double max_ppde = 0.0;         // |vertical FD of V - (theta V / x)_-|, scaled by V
    double max_horizontal = 0.0;   // |V after constant extension - V| / V
    double epsilon = 1e-5;         // relative bump used for the vertical check
};

/// Checks, along the grid: (a) the rebalancing identity
/// delta(phi~) . x + delta(psi~) = 0 for the post-jump implementation,
/// (b) the wealth PPDE nabla_x V = (theta V / x)_- by central finite
/// differences of V recomputed on bumped stopped paths, and (c) horizontal
/// invariance: extending the stopped path constantly leaves V unchanged.
/// The vertical check runs full re-evaluations, so it is subsampled to at
/// most max_probes grid points.
inline SelfFinancingReport verify_self_financing(const Strategy& strategy, const CadlagPath& path,
                                                 const Partition& p, double xi = 1.0,
                                                 std::size_t max_probes = 32) {
    SelfFinancingReport rep;
    StrategyPtr s = strategy.clone();
    std::vector<Vec> thetas_left, thetas_right;
    std::vector<double> vals =
        detail::wealth_values(*s, path, p, xi, &thetas_left, &thetas_right);
    const auto& ts = p.times();
    const Eigen::Index d = path.dim();

    // (a) rebalancing: buy-and-hold over (t_i, t_{i+1}] with the post-jump
    // holdings of t_i must land on V(t_{i+1})
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        const Vec xi_now = path.value(ts[i]);
        const Vec x_next = path.value(ts[i + 1]);
        const Vec phi = thetas_right[i].cwiseQuotient(xi_now) * vals[i];
        const double psi = (1.0 - thetas_right[i].sum()) * vals[i];
        const double res = std::abs(phi.dot(x_next) + psi - vals[i + 1]) / vals[i + 1];
        rep.max_rebalancing = std::max(rep.max_rebalancing, res);
    }

    // probe times for the recomputation-based checks
    const std::size_t stride = std::max<std::size_t>(1, ts.size() / max_probes);
    for (std::size_t i = 1; i < ts.size(); i += stride) {
        const double t = ts[i];
        std::vector<double> sub(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        const Partition psub(sub);
        CadlagPath stopped = path.stop(t);

        // (b) vertical: bump the final value componentwise on the step path
        // through the grid samples (so the bump is a pure jump at t), rerun
        // from scratch, and compare against (theta V / x)_- of the original
        // run
        const Vec x_t = path.value(t);
        const Vec x_left = path.left_limit(t);
        Mat grid_vals(static_cast<Eigen::Index>(i) + 1, d);
        for (std::size_t g = 0; g <= i; ++g)
            grid_vals.row(static_cast<Eigen::Index>(g)) = path.value(ts[g]);
        for (Eigen::Index j = 0; j < d; ++j) {
            const double eps = rep.epsilon * x_t(j);
            auto bumped_value = [&](double sign) {
                Mat kv = grid_vals;
                kv(kv.rows() - 1, j) += sign * eps;
                CadlagPath bumped(Interp::piecewise_constant, sub, std::move(kv), path.x0());
                StrategyPtr sb = strategy.clone();
                return detail::wealth_values(*sb, bumped, psub, xi).back();
            };
            const double fd = (bumped_value(1.0) - bumped_value(-1.0)) / (2.0 * eps);
            const double rhs = thetas_left[i](j) * vals[i - 1] / x_left(j);
            rep.max_ppde = std::max(rep.max_ppde, std::abs(fd - rhs) / vals[i]);
        }

        // (c) horizontal: constant extension must not move wealth
        if (i + 1 < ts.size()) {
            std::vector<double> ext = sub;
            ext.push_back(ts[i + 1]);
            StrategyPtr se = strategy.clone();
            const double v_ext =
                detail::wealth_values(*se, stopped, Partition(ext), xi).back();
            rep.max_horizontal =
                std::max(rep.max_horizontal, std::abs(v_ext - vals[i]) / vals[i]);
        }
    }
    return rep;
}

/// Pathwise Ito decomposition of ln V: drift - qv + jump_series, with the
/// uniform bound on the jump series.
struct ItoDecomposition {
    Partition partition;
    std::vector<double> drift;        // running sum of theta . dx / x
    std::vector<double> qv;           // half the running sum of squares
    std::vector<double> jump_series;  // third-order remainders
    std::vector<double> bound;        // 1/(2 (1-delta_-)^2) * running sum of squares
    std::vector<double> log_wealth;   // ln V on the same grid (xi = 1)
    std::vector<double> level_deviation;
    bool converged = true;
};

inline ItoDecomposition ito_decomposition(const Strategy& strategy, const CadlagPath& path,
                                          const RefinementLadder& ladder,
                                          const OmegaConstraint& omega,
                                          double tolerance = kLadderRelTol) {
    const OmegaReport om = check_omega(path, omega);
    if (!om.ok)
        throw OmegaViolation("path violates omega bounds: worst down " +
                             std::to_string(om.worst_down) + " at t = " +
                             std::to_string(om.time_down) + ", worst up " +
                             std::to_string(om.worst_up) + " at t = " +
                             std::to_string(om.time_up));

    const auto& knots = path.knot_times();
    const double denom = 2.0 * (1.0 - omega.delta_minus) * (1.0 - omega.delta_minus);

    auto level_run = [&](const Partition& p) {
        StrategyPtr s = strategy.clone();
        s->start(path);
        const auto& ts = p.times();
        ItoDecomposition out{p, {}, {}, {}, {}, {}, {}, true};
        out.drift.resize(ts.size());
        out.qv.resize(ts.size());
        out.jump_series.resize(ts.size());
        out.bound.resize(ts.size());
        out.log_wealth.resize(ts.size());
        detail::Kahan drift, sq, jumps, logw;
        Vec x_prev = path.x0();
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double t = ts[i];
            Vec theta = s->allocate(t, x_prev);
            Vec x_now = path.value(t);
            const double z = theta.dot((x_now - x_prev).cwiseQuotient(x_prev));
            if (!(1.0 + z > 0.0)) throw Ruin(t);
            drift.add(z);
            sq.add(z * z);
            jumps.add(std::log1p(z) - z + 0.5 * z * z);
            logw.add(std::log1p(z));
            s->settle(t, x_prev, x_now);
            x_prev = std::move(x_now);
            out.drift[i] = drift.value();
            out.qv[i] = 0.5 * sq.value();
            out.jump_series[i] = jumps.value();
            out.bound[i] = sq.value() / denom;
            out.log_wealth[i] = logw.value();
        }
        return out;
    };

    ItoDecomposition out = level_run(ladder.levels().front().refined_with(knots));
    for (std::size_t l = 1; l < ladder.levels().size(); ++l) {
        ItoDecomposition fine = level_run(ladder.levels()[l].refined_with(knots));
        out.level_deviation.push_back(detail::curve_deviation(
            out.partition, out.log_wealth, fine.partition, fine.log_wealth, false));
        const auto dev = std::move(out.level_deviation);
        out = std::move(fine);
        out.level_deviation = std::move(dev);
        if (out.level_deviation.back() <= tolerance) break;
    }
    out.converged = out.level_deviation.empty() || out.level_deviation.back() <= tolerance;
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form oracles
// ---------------------------------------------------------------------------

/// Closed-form target for wealth_limit. Kinds: single_stock, market_index,
/// simple_average, exponential_average, portfolio_of_portfolio. Asset indices
/// are 1-based; the portfolio-of-portfolio child is itself one of the
/// closed-form kinds.
struct ClosedFormSpec {
    std::string kind;
    Eigen::Index asset = 1;
    double horizon = 1.0;  // T for simple_average / portfolio_of_portfolio
    double lambda = 1.0;   // for exponential_average
    std::shared_ptr<ClosedFormSpec> child;  // for portfolio_of_portfolio
};

inline double closed_form_wealth(const ClosedFormSpec& spec, const CadlagPath& path, double t);

namespace detail {

/// int_0^b W_spec(s) ds by 5-point Gauss-Legendre on knot-subdivided panels;
/// exact integrals are used instead where the integrand is the path itself.
inline double closed_form_time_integral(const ClosedFormSpec& spec, const CadlagPath& path,
                                        double b) {
    if (b <= 0.0) return 0.0;
    if (spec.kind == "single_stock") {
        if (spec.asset < 1 || spec.asset > path.dim())
            throw IndexOutOfRange("closed_form: asset index");
        return path.integrate(spec.asset - 1, 0.0, b) / path.x0()(spec.asset - 1);
    }
    if (spec.kind == "market_index") {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < path.dim(); ++j) acc += path.integrate(j, 0.0, b);
        return acc / path.x0().sum();
    }
    static const double gl_x[5] = {-0.906179845938664, -0.538469310105683, 0.0,
                                   0.538469310105683, 0.906179845938664};
    static const double gl_w[5] = {0.236926885056189, 0.478628670499366, 0.568888888888889,
                                   0.478628670499366, 0.236926885056189};
    std::vector<double> cuts{0.0};
    for (double kt : path.knot_times())
        if (kt > 0.0 && kt < b) cuts.push_back(kt);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        const double half = 0.5 * (cuts[i + 1] - cuts[i]);
        for (int g = 0; g < 5; ++g)
            acc += gl_w[g] * half * closed_form_wealth(spec, path, mid + half * gl_x[g]);
    }
    return acc;
}

}  // namespace detail

inline double closed_form_wealth(const ClosedFormSpec& spec, const CadlagPath& path, double t) {
    if (spec.kind == "single_stock") {
        if (spec.asset < 1 || spec.asset > path.dim())
            throw IndexOutOfRange("closed_form: asset index");
        return path.value(t)(spec.asset - 1) / path.x0()(spec.asset - 1);
    }
    if (spec.kind == "market_index") {
        return path.value(t).sum() / path.x0().sum();
    }
    if (spec.kind == "simple_average") {
        if (spec.asset < 1 || spec.asset > path.dim())
            throw IndexOutOfRange("closed_form: asset index");
        if (!(spec.horizon > 0.0)) throw InvalidHorizon("closed_form: T must be > 0");
        const Eigen::Index c = spec.asset - 1;
        const double tc = std::min(t, spec.horizon);
        const double run = path.integrate(c, 0.0, tc);
        const double tail = (spec.horizon - tc) * path.value(t)(c);
        return (run + tail) / (spec.horizon * path.x0()(c));
    }
    if (spec.kind == "exponential_average") {
        if (spec.asset < 1 || spec.asset > path.dim())
            throw IndexOutOfRange("closed_form: asset index");
        if (!(spec.lambda > 0.0)) throw InvalidParams("closed_form: lambda must be > 0");
        const Eigen::Index c = spec.asset - 1;
        const double run = detail::discounted_integral(path, c, spec.lambda, 0.0, t);
        const double tail = path.value(t)(c) * std::exp(-spec.lambda * t);
        return (run + tail) / path.x0()(c);
    }
    if (spec.kind == "portfolio_of_portfolio") {
        if (!spec.child) throw InvalidParams("closed_form: portfolio_of_portfolio needs a child");
        if (!(spec.horizon > 0.0)) throw InvalidHorizon("closed_form: T must be > 0");
        const double tc = std::min(t, spec.horizon);
        const double run = detail::closed_form_time_integral(*spec.child, path.stop(t), tc);
        const double tail = (spec.horizon - tc) * closed_form_wealth(*spec.child, path, t);
        return (run + tail) / spec.horizon;
    }
    throw UnknownKind("closed_form: unknown kind '" + spec.kind + "'");
}

}  // namespace pathfolio
