#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pathfolio/path.hpp"

namespace pathfolio {

namespace detail {

/// lambda * int_a^b x_c(s) e^{-lambda s} ds, exact per knot segment
/// (constant extension beyond the last knot, left grid sums for
/// sampled_dense).
inline double discounted_integral(const CadlagPath& path, Eigen::Index c, double lambda,
                                  double a, double b) {
    if (b <= a) return 0.0;
    const auto& kt = path.knot_times();
    const Mat& kv = path.knot_values();
    double acc = 0.0;
    for (std::size_t i = 0; i < kt.size(); ++i) {
        const double seg_lo = kt[i];
        const double seg_hi = (i + 1 < kt.size()) ? kt[i + 1] : b;
        const double s0 = std::max(a, seg_lo);
        const double s1 = std::min(b, std::max(seg_hi, s0));
        if (s1 <= s0) continue;
        if (path.interp() == Interp::piecewise_linear && i + 1 < kt.size()) {
            const double slope = (kv(static_cast<Eigen::Index>(i) + 1, c) -
                                  kv(static_cast<Eigen::Index>(i), c)) /
                                 (kt[i + 1] - kt[i]);
            auto at = [&](double s) {
                return kv(static_cast<Eigen::Index>(i), c) + slope * (s - kt[i]);
            };
            acc += (at(s0) + slope / lambda) * std::exp(-lambda * s0) -
                   (at(s1) + slope / lambda) * std::exp(-lambda * s1);
        } else {
            acc += kv(static_cast<Eigen::Index>(i), c) *
                   (std::exp(-lambda * s0) - std::exp(-lambda * s1));
        }
    }
    return acc;
}

}  // namespace detail

/// theta_i >= 0 and sum theta_i <= 1; the slack is the cash weight.
inline bool valid_allocation(const Vec& theta, double tol = 1e-9) {
    return (theta.array() >= -tol).all() && theta.sum() <= 1.0 + tol;
}

/// Point of the m-simplex: b_k >= 0, sum b_k <= 1.
struct SimplexPoint {
    Vec b;
    explicit SimplexPoint(Vec v) : b(std::move(v)) {
        if (!valid_allocation(b, 1e-12)) throw InvalidParams("simplex point outside the simplex");
    }
};

/// Causal allocation functional, evaluated incrementally along a working
/// partition.
///
/// Protocol per run: start(path) once, then for each increment ending at t
///   theta = allocate(t, x(t-))   -- the allocation theta(t, x_{t-})
///   settle(t, x_prev, x_now)     -- the price move the increment delivered
/// allocate() may only see the path strictly before t (the left-stopped
/// prefix); wealth-tracking state advances in settle().
class Strategy {
public:
    virtual ~Strategy() = default;

    virtual std::string id() const = 0;
    virtual std::unique_ptr<Strategy> clone() const = 0;

    void start(const CadlagPath& path) {
        path_ = &path;
        last_t_ = 0.0;
        on_start(path);
    }

    Vec allocate(double t, const Vec& x_left) {
        if (path_ == nullptr) throw StateCorrupt("allocate before start");
        if (t < last_t_) throw StateCorrupt("allocate time moved backwards");
        Vec theta = do_allocate(t, x_left);
        last_t_ = t;
        return theta;
    }

    void settle(double t, const Vec& x_prev, const Vec& x_now) {
        if (path_ == nullptr) throw StateCorrupt("settle before start");
        do_settle(t, x_prev, x_now);
    }

protected:
    virtual void on_start(const CadlagPath&) {}
    virtual Vec do_allocate(double t, const Vec& x_left) = 0;
    virtual void do_settle(double, const Vec&, const Vec&) {}

    const CadlagPath* path() const { return path_; }
    double last_time() const { return last_t_; }

private:
    const CadlagPath* path_ = nullptr;
    double last_t_ = 0.0;
};

using StrategyPtr = std::unique_ptr<Strategy>;

/// theta(t, prefix): run the strategy along the prefix knots and evaluate at
/// t on the left-stopped path. The prefix must be the path stopped at t.
inline Vec eval(const Strategy& strategy, double t, const CadlagPath& prefix) {
    StrategyPtr s = strategy.clone();
    s->start(prefix);
    Vec prev = prefix.x0();
    for (double tau : prefix.knot_times()) {
        if (tau >= t) break;
        Vec theta = s->allocate(tau, prefix.left_limit(tau));
        Vec now = prefix.value(tau);
        s->settle(tau, prev, now);
        prev = std::move(now);
    }
    return s->allocate(t, prefix.left_limit(t));
}

// ---------------------------------------------------------------------------
// Built-in strategies
// ---------------------------------------------------------------------------

class PureCash final : public Strategy {
public:
    std::string id() const override { return "cash"; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<PureCash>(*this); }

protected:
    Vec do_allocate(double, const Vec& x_left) override { return Vec::Zero(x_left.size()); }
};

class SingleStock final : public Strategy {
public:
    explicit SingleStock(Eigen::Index asset) : asset_(asset) {
        if (asset_ < 1) throw IndexOutOfRange("single_stock: asset index is 1-based");
    }
    std::string id() const override { return "single_stock(" + std::to_string(asset_) + ")"; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<SingleStock>(*this); }

protected:
    void on_start(const CadlagPath& p) override {
        if (asset_ > p.dim()) throw IndexOutOfRange("single_stock: asset index exceeds dimension");
    }
    Vec do_allocate(double, const Vec& x_left) override {
        Vec theta = Vec::Zero(x_left.size());
        theta(asset_ - 1) = 1.0;
        return theta;
    }

private:
    Eigen::Index asset_;
};

class MarketIndex final : public Strategy {
public:
    std::string id() const override { return "market_index"; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<MarketIndex>(*this); }

protected:
    Vec do_allocate(double, const Vec& x_left) override { return x_left / x_left.sum(); }
};

/// Weight on asset i decaying so that wealth equals the running time average
/// of the stock ratio over [0, T].
class SimpleAverage final : public Strategy {
public:
    SimpleAverage(Eigen::Index asset, double horizon) : asset_(asset), horizon_(horizon) {
        if (asset_ < 1) throw IndexOutOfRange("simple_average: asset index is 1-based");
        if (!(horizon_ > 0.0)) throw InvalidHorizon("simple_average: T must be > 0");
    }
    std::string id() const override {
        return "simple_average(" + std::to_string(asset_) + "," + std::to_string(horizon_) + ")";
    }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<SimpleAverage>(*this); }

protected:
    void on_start(const CadlagPath& p) override {
        if (asset_ > p.dim()) throw IndexOutOfRange("simple_average: asset index exceeds dimension");
        integral_ = 0.0;
    }
    Vec do_allocate(double t, const Vec& x_left) override {
        integral_ += path()->integrate(asset_ - 1, last_time(), t);
        Vec theta = Vec::Zero(x_left.size());
        const double decay = 1.0 - std::min(t, horizon_) / horizon_;
        const double num = x_left(asset_ - 1) * decay;
        if (num > 0.0) theta(asset_ - 1) = num / (integral_ / horizon_ + num);
        return theta;
    }

private:
    Eigen::Index asset_;
    double horizon_;
    double integral_ = 0.0;
};

/// Exponentially discounted average; the running integral is kept as
/// K(t) = lambda * int_0^t x_i(s) e^{-lambda s} ds so nothing overflows.
class ExponentialAverage final : public Strategy {
public:
    ExponentialAverage(Eigen::Index asset, double lambda) : asset_(asset), lambda_(lambda) {
        if (asset_ < 1) throw IndexOutOfRange("exponential_average: asset index is 1-based");
        if (!(lambda_ > 0.0)) throw InvalidParams("exponential_average: lambda must be > 0");
    }
    std::string id() const override {
        return "exponential_average(" + std::to_string(asset_) + "," + std::to_string(lambda_) + ")";
    }
    std::unique_ptr<Strategy> clone() const override {
        return std::make_unique<ExponentialAverage>(*this);
    }

protected:
    void on_start(const CadlagPath& p) override {
        if (asset_ > p.dim()) throw IndexOutOfRange("exponential_average: asset index exceeds dimension");
        discounted_ = 0.0;
    }
    Vec do_allocate(double t, const Vec& x_left) override {
        discounted_ += detail::discounted_integral(*path(), asset_ - 1, lambda_, last_time(), t);
        Vec theta = Vec::Zero(x_left.size());
        const double q = x_left(asset_ - 1) * std::exp(-lambda_ * t);
        if (discounted_ + q > 0.0) theta(asset_ - 1) = q / (discounted_ + q);
        return theta;
    }

private:
    Eigen::Index asset_;
    double lambda_;
    double discounted_ = 0.0;
};

/// Reweights a self-financing child by its own wealth with a linear decay;
/// the child wealth is tracked internally from the settled increments.
class PortfolioOfPortfolio final : public Strategy {
public:
    PortfolioOfPortfolio(StrategyPtr child, double horizon)
        : child_(std::move(child)), horizon_(horizon) {
        if (!child_) throw InvalidParams("portfolio_of_portfolio: null child");
        if (!(horizon_ > 0.0)) throw InvalidHorizon("portfolio_of_portfolio: T must be > 0");
    }
    PortfolioOfPortfolio(const PortfolioOfPortfolio& o)
        : child_(o.child_->clone()),
          horizon_(o.horizon_),
          wealth_(o.wealth_),
          wealth_integral_(o.wealth_integral_),
          pending_(o.pending_) {}

    std::string id() const override { return "portfolio_of_portfolio(" + child_->id() + ")"; }
    std::unique_ptr<Strategy> clone() const override {
        return std::make_unique<PortfolioOfPortfolio>(*this);
    }

protected:
    void on_start(const CadlagPath& p) override {
        child_->start(p);
        wealth_ = 1.0;
        wealth_integral_ = 0.0;
        pending_.resize(0);
    }
    Vec do_allocate(double t, const Vec& x_left) override {
        wealth_integral_ += wealth_ * (t - last_time());
        pending_ = child_->allocate(t, x_left);
        const double decay = 1.0 - std::min(t, horizon_) / horizon_;
        const double scaled = wealth_ * decay;
        const double denom = wealth_integral_ / horizon_ + scaled;
        if (denom <= 0.0) return Vec::Zero(x_left.size());
        return pending_ * (scaled / denom);
    }
    void do_settle(double t, const Vec& x_prev, const Vec& x_now) override {
        if (pending_.size() != 0) {
            const double factor =
                1.0 + pending_.dot((x_now - x_prev).cwiseQuotient(x_prev));
            if (factor <= 0.0) throw Ruin(t);
            wealth_ *= factor;
        }
        child_->settle(t, x_prev, x_now);
    }

private:
    StrategyPtr child_;
    double horizon_;
    double wealth_ = 1.0;
    double wealth_integral_ = 0.0;
    Vec pending_;
};

/// Softmax of the running pathwise log-return integrals L_i = int 1/x_i dx_i,
/// accumulated as left-Riemann sums along the working partition.
class Softmax final : public Strategy {
public:
    std::string id() const override { return "softmax"; }
    std::unique_ptr<Strategy> clone() const override { return std::make_unique<Softmax>(*this); }

protected:
    void on_start(const CadlagPath& p) override { logits_ = Vec::Zero(p.dim()); }
    Vec do_allocate(double, const Vec&) override {
        Vec w = (logits_.array() - logits_.maxCoeff()).exp();
        return w / w.sum();
    }
    void do_settle(double, const Vec& x_prev, const Vec& x_now) override {
        logits_ += (x_now - x_prev).cwiseQuotient(x_prev);
    }

private:
    Vec logits_;
};

/// Pointwise convex combination sum b_k theta^(k); the slack 1 - sum b_k
/// stays in cash.
class ConvexCombination final : public Strategy {
public:
    ConvexCombination(std::vector<StrategyPtr> children, SimplexPoint b)
        : children_(std::move(children)), b_(std::move(b)) {
        if (children_.empty()) throw InvalidParams("convex_combination: no children");
        if (b_.b.size() != static_cast<Eigen::Index>(children_.size()))
            throw DimensionMismatch("convex_combination: |b| != |children|");
        for (const auto& c : children_)
            if (!c) throw InvalidParams("convex_combination: null child");
    }
    ConvexCombination(const ConvexCombination& o) : children_(), b_(o.b_) {
        children_.reserve(o.children_.size());
        for (const auto& c : o.children_) children_.push_back(c->clone());
    }

    std::string id() const override { return "convex_combination"; }
    std::unique_ptr<Strategy> clone() const override {
        return std::make_unique<ConvexCombination>(*this);
    }

protected:
    void on_start(const CadlagPath& p) override {
        for (auto& c : children_) c->start(p);
    }
    Vec do_allocate(double t, const Vec& x_left) override {
        Vec theta = Vec::Zero(x_left.size());
        for (std::size_t k = 0; k < children_.size(); ++k)
            theta += b_.b(static_cast<Eigen::Index>(k)) * children_[k]->allocate(t, x_left);
        return theta;
    }
    void do_settle(double t, const Vec& x_prev, const Vec& x_now) override {
        for (auto& c : children_) c->settle(t, x_prev, x_now);
    }

private:
    std::vector<StrategyPtr> children_;
    SimplexPoint b_;
};

/// Child allocation until T, cash afterwards.
class StoppedStrategy final : public Strategy {
public:
    StoppedStrategy(StrategyPtr child, double horizon)
        : child_(std::move(child)), horizon_(horizon) {
        if (!child_) throw InvalidParams("stopped: null child");
        if (!(horizon_ > 0.0)) throw InvalidHorizon("stopped: T must be > 0");
    }
    StoppedStrategy(const StoppedStrategy& o) : child_(o.child_->clone()), horizon_(o.horizon_) {}

    std::string id() const override { return "stopped(" + child_->id() + ")"; }
    std::unique_ptr<Strategy> clone() const override {
        return std::make_unique<StoppedStrategy>(*this);
    }

protected:
    void on_start(const CadlagPath& p) override { child_->start(p); }
    Vec do_allocate(double t, const Vec& x_left) override {
        Vec theta = child_->allocate(t, x_left);
        return t <= horizon_ ? theta : Vec(Vec::Zero(x_left.size()));
    }
    void do_settle(double t, const Vec& x_prev, const Vec& x_now) override {
        child_->settle(t, x_prev, x_now);
    }

private:
    StrategyPtr child_;
    double horizon_;
};

// Factory helpers mirroring the configuration surface. Asset indices are
// 1-based.
inline StrategyPtr make_pure_cash() { return std::make_unique<PureCash>(); }
inline StrategyPtr make_single_stock(Eigen::Index i) { return std::make_unique<SingleStock>(i); }
inline StrategyPtr make_market_index() { return std::make_unique<MarketIndex>(); }
inline StrategyPtr make_simple_average(Eigen::Index i, double T) {
    return std::make_unique<SimpleAverage>(i, T);
}
inline StrategyPtr make_exponential_average(Eigen::Index i, double lambda) {
    return std::make_unique<ExponentialAverage>(i, lambda);
}
inline StrategyPtr make_portfolio_of_portfolio(StrategyPtr child, double T) {
    return std::make_unique<PortfolioOfPortfolio>(std::move(child), T);
}
inline StrategyPtr make_softmax() { return std::make_unique<Softmax>(); }
inline StrategyPtr make_convex_combination(std::vector<StrategyPtr> children, SimplexPoint b) {
    return std::make_unique<ConvexCombination>(std::move(children), std::move(b));
}
inline StrategyPtr make_stopped(StrategyPtr child, double T) {
    return std::make_unique<StoppedStrategy>(std::move(child), T);
}

}  // namespace pathfolio
