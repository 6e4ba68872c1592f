#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pathfolio/simplex.hpp"
#include "pathfolio/wealth.hpp"

namespace pathfolio {

/// Laissez-faire aggregate: allocations averaged with weights b_k W_k, where
/// the child wealths W_k are advanced jointly on the engine's working grid.
/// The aggregate wealth is exactly sum_k b_k W_k, step by step.
class LaissezFaire final : public Strategy {
public:
    LaissezFaire(std::vector<StrategyPtr> children, Vec b)
        : children_(std::move(children)), b_(std::move(b)) {
        if (children_.empty()) throw InvalidParams("laissez_faire: no children");
        if (b_.size() != static_cast<Eigen::Index>(children_.size()))
            throw DimensionMismatch("laissez_faire: |b| != |children|");
        if ((b_.array() < 0.0).any() || std::abs(b_.sum() - 1.0) > 1e-12)
            throw InvalidParams("laissez_faire: b must have b_k >= 0, sum b = 1");
        for (const auto& c : children_)
            if (!c) throw InvalidParams("laissez_faire: null child");
    }
    LaissezFaire(const LaissezFaire& o)
        : children_(), b_(o.b_), wealth_(o.wealth_), pending_(o.pending_) {
        children_.reserve(o.children_.size());
        for (const auto& c : o.children_) children_.push_back(c->clone());
    }

    std::string id() const override { return "laissez_faire"; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<LaissezFaire>(*this); }

    /// Child wealths at the last settled grid point.
    const std::vector<double>& child_wealths() const { return wealth_; }

protected:
    void on_start(const CadlagPath& p) override {
        for (auto& c : children_) c->start(p);
        wealth_.assign(children_.size(), 1.0);
        pending_.assign(children_.size(), Vec());
    }
    Vec do_allocate(double t, const Vec& x_left) override {
        Vec num = Vec::Zero(x_left.size());
        double den = 0.0;
        for (std::size_t k = 0; k < children_.size(); ++k) {
            pending_[k] = children_[k]->allocate(t, x_left);
            const double w = b_(static_cast<Eigen::Index>(k)) * wealth_[k];
            num += w * pending_[k];
            den += w;
        }
        return num / den;
    }
    void do_settle(double t, const Vec& x_prev, const Vec& x_now) override {
        const Vec u = (x_now - x_prev).cwiseQuotient(x_prev);
        for (std::size_t k = 0; k < children_.size(); ++k) {
            if (pending_[k].size() != 0) {
                const double factor = 1.0 + pending_[k].dot(u);
                if (!(factor > 0.0)) throw Ruin(t);
                wealth_[k] *= factor;
            }
            children_[k]->settle(t, x_prev, x_now);
        }
    }

private:
    std::vector<StrategyPtr> children_;
    Vec b_;
    std::vector<double> wealth_;
    std::vector<Vec> pending_;
};

inline StrategyPtr laissez_faire(std::vector<StrategyPtr> children, Vec b) {
    return std::make_unique<LaissezFaire>(std::move(children), std::move(b));
}

/// max_t |W_hat(t) - sum b_k W_k(t)| / sum b_k W_k(t); all curves must share
/// one partition.
inline double verify_mixture(const WealthCurve& aggregate,
                             const std::vector<WealthCurve>& children, const Vec& b) {
    if (b.size() != static_cast<Eigen::Index>(children.size()))
        throw DimensionMismatch("verify_mixture: |b| != |children|");
    const std::size_t n = aggregate.values.size();
    for (const auto& c : children)
        if (c.values.size() != n)
            throw DimensionMismatch("verify_mixture: curves on different partitions");
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mix = 0.0;
        for (std::size_t k = 0; k < children.size(); ++k)
            mix += b(static_cast<Eigen::Index>(k)) * children[k].values[i];
        worst = std::max(worst, std::abs(aggregate.values[i] - mix) / mix);
    }
    return worst;
}

/// Pointwise check of 1 <= W*/W_hat <= max_k 1/b_k plus the final log gap
/// and its time-decayed rate.
struct TrackingReport {
    std::vector<double> ratio;   // W*(t)/W_hat(t)
    double bound = 0.0;          // max_k 1/b_k
    double w_star_final = 0.0;
    double log_ratio_final = 0.0;
    double rate = 0.0;           // (1/T) log_ratio_final
};

inline TrackingReport tracking_report(const std::vector<WealthCurve>& children,
                                      const WealthCurve& aggregate, const Vec& b,
                                      double slack = 1e-9) {
    if (b.size() != static_cast<Eigen::Index>(children.size()))
        throw DimensionMismatch("tracking_report: |b| != |children|");
    if ((b.array() <= 0.0).any())
        throw InvalidParams("tracking_report: requires interior b (all b_k > 0)");
    const std::size_t n = aggregate.values.size();
    for (const auto& c : children)
        if (c.values.size() != n)
            throw DimensionMismatch("tracking_report: curves on different partitions");

    TrackingReport rep;
    rep.bound = (1.0 / b.array()).maxCoeff();
    rep.ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ws = 0.0;
        for (const auto& c : children) ws = std::max(ws, c.values[i]);
        const double r = ws / aggregate.values[i];
        rep.ratio[i] = r;
        if (r < 1.0 - slack || r > rep.bound * (1.0 + slack))
            throw BoundViolation("tracking bound violated at t = " +
                                 std::to_string(aggregate.partition.times()[i]) +
                                 ": ratio " + std::to_string(r));
        if (i + 1 == n) rep.w_star_final = ws;
    }
    rep.log_ratio_final = std::log(rep.ratio.back());
    rep.rate = rep.log_ratio_final / aggregate.partition.horizon();
    return rep;
}

/// Grid of evaluation times native to a path: its knots, padded to a valid
/// partition.
inline Partition natural_partition(const CadlagPath& path) {
    std::vector<double> t = path.knot_times();
    if (t.size() < 2) t.push_back(std::max(path.horizon(), 1.0));
    return Partition(std::move(t));
}

struct MinimaxResult {
    Vec b_star;
    double value = 1.0;  // max over scenarios of W*/W_hat(b*) at the horizon
};

/// Minimize over b in {b >= 0, sum b = 1} the worst-scenario terminal
/// tracking ratio. Projected subgradient with multi-start plus a dense grid
/// pass for m <= 3; any attaining point is acceptable, ties broken toward
/// the lexicographically smallest b*.
inline MinimaxResult minimax_weights(const std::vector<const Strategy*>& strategies,
                                     const std::vector<CadlagPath>& scenarios,
                                     std::uint64_t seed = 1) {
    if (scenarios.empty()) throw EmptyScenarioSet("minimax_weights: no scenarios");
    if (strategies.empty()) throw InvalidParams("minimax_weights: no strategies");
    const Eigen::Index m = static_cast<Eigen::Index>(strategies.size());

    // terminal child wealths per scenario
    std::vector<Vec> w(scenarios.size());
    std::vector<double> w_star(scenarios.size());
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
        const Partition p = natural_partition(scenarios[s]);
        Vec row(m);
        for (Eigen::Index k = 0; k < m; ++k)
            row(k) = wealth_discrete(*strategies[static_cast<std::size_t>(k)], scenarios[s], p)
                         .values.back();
        w_star[s] = row.maxCoeff();
        w[s] = std::move(row);
    }

    auto objective = [&](const Vec& b) {
        double worst = 0.0;
        for (std::size_t s = 0; s < scenarios.size(); ++s)
            worst = std::max(worst, w_star[s] / b.dot(w[s]));
        return worst;
    };
    auto lex_less = [](const Vec& a, const Vec& b) {
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            if (a(i) < b(i) - 1e-12) return true;
            if (a(i) > b(i) + 1e-12) return false;
        }
        return false;
    };

    MinimaxResult best;
    best.b_star = Vec::Constant(m, 1.0 / static_cast<double>(m));
    best.value = objective(best.b_star);
    auto consider = [&](const Vec& b) {
        const double f = objective(b);
        if (f < best.value - 1e-12 ||
            (f < best.value + 1e-12 && lex_less(b, best.b_star))) {
            best.value = f;
            best.b_star = b;
        }
    };

    std::mt19937_64 rng(seed);
    for (int start = 0; start < 32; ++start) {
        Vec b = uniform_simplex(m, rng);
        for (int it = 1; it <= 500; ++it) {
            // subgradient of the active scenario's ratio
            std::size_t arg = 0;
            double worst = 0.0;
            for (std::size_t s = 0; s < scenarios.size(); ++s) {
                const double f = w_star[s] / b.dot(w[s]);
                if (f > worst) {
                    worst = f;
                    arg = s;
                }
            }
            const double den = b.dot(w[arg]);
            Vec g = -w_star[arg] * w[arg] / (den * den);
            const double gn = g.norm();
            if (gn == 0.0) break;
            b = project_simplex(b - (0.5 / std::sqrt(static_cast<double>(it))) * (g / gn));
            consider(b);
        }
    }

    if (m <= 3) {
        const int res = (m == 3) ? 200 : 2000;
        if (m == 1) {
            consider(Vec::Ones(1));
        } else if (m == 2) {
            for (int i = 0; i <= res; ++i) {
                Vec b(2);
                b << static_cast<double>(i) / res, 1.0 - static_cast<double>(i) / res;
                consider(b);
            }
        } else {
            for (int i = 0; i <= res; ++i)
                for (int j = 0; j <= res - i; ++j) {
                    Vec b(3);
                    b << static_cast<double>(i) / res, static_cast<double>(j) / res,
                        static_cast<double>(res - i - j) / res;
                    consider(b);
                }
        }
        // local polish around the grid winner
        Vec b = best.b_star;
        for (int it = 1; it <= 500; ++it) {
            std::size_t arg = 0;
            double worst = 0.0;
            for (std::size_t s = 0; s < scenarios.size(); ++s) {
                const double f = w_star[s] / b.dot(w[s]);
                if (f > worst) {
                    worst = f;
                    arg = s;
                }
            }
            const double den = b.dot(w[arg]);
            Vec g = -w_star[arg] * w[arg] / (den * den);
            const double gn = g.norm();
            if (gn == 0.0) break;
            b = project_simplex(b - (0.05 / std::sqrt(static_cast<double>(it))) * (g / gn));
            consider(b);
        }
    }
    return best;
}

/// Insured combination of terminal wealth and its running time average:
/// children theta 1_{[0,T]} and the portfolio-of-portfolio reweighting,
/// aggregated with weights (1 - b2, b2). Returns the aggregate and the max
/// relative gap between its wealth and the displayed identity
/// (1-b2) W(t^T) + b2 (1/T) int_0^T W(s^t) ds, evaluated by left-Riemann
/// quadrature of the child wealth on the same grid.
struct InsuredResult {
    StrategyPtr aggregate;
    double max_identity_error = 0.0;
};

inline InsuredResult best_final_vs_time_average(const Strategy& child, double T, double b2,
                                                const CadlagPath& path, const Partition& p) {
    if (!(T > 0.0)) throw InvalidHorizon("best_final_vs_time_average: T must be > 0");
    if (b2 < 0.0 || b2 > 1.0)
        throw InvalidParams("best_final_vs_time_average: b2 must be in [0,1]");

    std::vector<StrategyPtr> kids;
    kids.push_back(make_stopped(child.clone(), T));
    kids.push_back(make_portfolio_of_portfolio(child.clone(), T));
    Vec b(2);
    b << 1.0 - b2, b2;
    InsuredResult out{laissez_faire(std::move(kids), b), 0.0};

    const WealthCurve agg = wealth_discrete(*out.aggregate, path, p);
    const WealthCurve w = wealth_discrete(child, path, p);
    const auto& ts = p.times();
    double iw = 0.0;       // int_0^t W(s) ds, left-Riemann on the grid
    double w_at_T = -1.0;  // W(t ^ T)
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double t = ts[i];
        if (t >= T && w_at_T < 0.0) w_at_T = w.values[i];
        const double stopped = (t <= T) ? w.values[i] : w_at_T;
        const double tc = std::min(t, T);
        const double avg = (iw + (T - tc) * stopped) / T;
        const double rhs = (1.0 - b2) * stopped + b2 * avg;
        out.max_identity_error =
            std::max(out.max_identity_error, std::abs(agg.values[i] - rhs) / rhs);
        if (i + 1 < ts.size()) iw += w.values[i] * (std::min(ts[i + 1], T) - tc);
    }
    return out;
}

}  // namespace pathfolio
