#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pathfolio/errors.hpp"

namespace pathfolio {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// How knot values are read between knots.
enum class Interp {
    piecewise_constant,  // right-continuous step path; knots are the jumps
    piecewise_linear,    // continuous, linear between knots
    sampled_dense        // dense sampling of a continuous path; linear read,
                         // grid-sum time integrals
};

/// Positive d-dimensional cadlag price path stored as a knot list.
///
/// The path is defined on [0, inf): the first knot sits at t = 0 and the
/// value extends constantly beyond the last knot. x(0-) = x0 may differ from
/// the value at the first knot (a jump at 0).
class CadlagPath {
public:
    CadlagPath(Interp interp, std::vector<double> times, Mat values)
        : CadlagPath(interp, std::move(times), std::move(values), Vec{}) {}

    CadlagPath(Interp interp, std::vector<double> times, Mat values, Vec x0)
        : interp_(interp), times_(std::move(times)), values_(std::move(values)) {
        if (times_.empty() || values_.rows() != static_cast<Eigen::Index>(times_.size()))
            throw InvalidParams("path needs one value row per knot time");
        if (times_.front() != 0.0)
            throw InvalidParams("first knot must be at t = 0");
        if (values_.cols() < 1) throw InvalidParams("path dimension must be >= 1");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw InvalidParams("knot times must be strictly increasing");
        x0_ = x0.size() == 0 ? Vec(values_.row(0)) : std::move(x0);
        if (x0_.size() != values_.cols())
            throw DimensionMismatch("x0 dimension mismatch");
        if ((x0_.array() <= 0.0).any() || (values_.array() <= 0.0).any())
            throw InvalidParams("path values must be strictly positive");
        if (interp_ != Interp::piecewise_constant && (x0_ - Vec(values_.row(0))).norm() != 0.0)
            throw InvalidParams("continuous representations cannot jump at t = 0");
    }

    Interp interp() const { return interp_; }
    Eigen::Index dim() const { return values_.cols(); }
    double horizon() const { return times_.back(); }
    const Vec& x0() const { return x0_; }
    const std::vector<double>& knot_times() const { return times_; }
    const Mat& knot_values() const { return values_; }

    /// x(t), right-continuous.
    Vec value(double t) const {
        if (t < 0.0) return x0_;
        const auto i = last_knot_at_or_before(t);
        if (interp_ == Interp::piecewise_constant || i + 1 >= times_.size() ||
            times_[i] == t)
            return values_.row(i);
        const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
        return values_.row(i) * (1.0 - w) + values_.row(i + 1) * w;
    }

    /// x(t-), the left limit.
    Vec left_limit(double t) const {
        if (t <= 0.0) return x0_;
        if (interp_ != Interp::piecewise_constant) return value(t);
        // strictly before t
        auto it = std::lower_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return x0_;
        return values_.row(static_cast<Eigen::Index>(it - times_.begin()) - 1);
    }

    /// Delta x(t) = x(t) - x(t-).
    Vec jump(double t) const { return value(t) - left_limit(t); }

    /// Jump times on (0, horizon], plus 0 if x(0) != x0. Empty for
    /// continuous representations.
    std::vector<double> jump_times() const {
        std::vector<double> out;
        if (interp_ != Interp::piecewise_constant) return out;
        if ((Vec(values_.row(0)) - x0_).norm() != 0.0) out.push_back(0.0);
        for (std::size_t i = 1; i < times_.size(); ++i)
            if ((values_.row(i) - values_.row(i - 1)).norm() != 0.0)
                out.push_back(times_[i]);
        return out;
    }

    /// Integral of component i over [a, b], exact for the stored
    /// representation (left grid sums for sampled_dense).
    double integrate(Eigen::Index comp, double a, double b) const {
        if (comp < 0 || comp >= dim()) throw IndexOutOfRange("integrate: bad component");
        if (b <= a) return 0.0;
        double acc = 0.0;
        // piece before the first knot (only reachable when a < 0, not used in
        // practice since paths start at 0)
        double lo = a;
        for (std::size_t i = 0; i < times_.size() && lo < b; ++i) {
            const double seg_lo = times_[i];
            const double seg_hi = (i + 1 < times_.size()) ? times_[i + 1] : b;
            const double s0 = std::max(lo, seg_lo);
            const double s1 = std::min(b, std::max(seg_hi, s0));
            if (s1 <= s0) continue;
            if (interp_ == Interp::piecewise_linear && i + 1 < times_.size()) {
                const double v0 = interp_at(comp, i, s0);
                const double v1 = interp_at(comp, i, s1);
                acc += 0.5 * (v0 + v1) * (s1 - s0);
            } else {
                // constant pieces, sampled_dense grid sums, and the constant
                // extension beyond the last knot
                acc += values_(static_cast<Eigen::Index>(i), comp) * (s1 - s0);
            }
            lo = s1;
        }
        return acc;
    }

    /// x stopped at t: s -> x(s ^ t).
    CadlagPath stop(double t) const {
        if (t < 0.0) throw InvalidParams("stop time must be >= 0");
        if (t >= horizon()) return *this;
        auto [times, vals] = truncate_at_or_before(t);
        if (times.back() < t && interp_ != Interp::piecewise_constant) {
            times.push_back(t);
            vals.conservativeResize(vals.rows() + 1, Eigen::NoChange);
            vals.row(vals.rows() - 1) = value(t);
        }
        return CadlagPath(interp_, std::move(times), std::move(vals), x0_);
    }

    /// x_{t-}: stopped at t with the jump at t removed.
    CadlagPath stop_left(double t) const {
        if (t < 0.0) throw InvalidParams("stop time must be >= 0");
        if (interp_ != Interp::piecewise_constant) return stop(t);
        if (t == 0.0) {
            Mat v(1, dim());
            v.row(0) = x0_;
            return CadlagPath(interp_, {0.0}, std::move(v), x0_);
        }
        // knots strictly before t; constant extension supplies x(t-)
        std::vector<double> times;
        std::vector<Eigen::Index> keep;
        for (std::size_t i = 0; i < times_.size(); ++i)
            if (times_[i] < t) {
                times.push_back(times_[i]);
                keep.push_back(static_cast<Eigen::Index>(i));
            }
        if (times.empty()) {
            Mat v(1, dim());
            v.row(0) = x0_;
            return CadlagPath(interp_, {0.0}, std::move(v), x0_);
        }
        Mat vals(static_cast<Eigen::Index>(keep.size()), dim());
        for (std::size_t i = 0; i < keep.size(); ++i) vals.row(static_cast<Eigen::Index>(i)) = values_.row(keep[i]);
        return CadlagPath(interp_, std::move(times), std::move(vals), x0_);
    }

    bool same_knots(const CadlagPath& other) const {
        return interp_ == other.interp_ && times_ == other.times_ &&
               values_ == other.values_ && x0_ == other.x0_;
    }

private:
    std::size_t last_knot_at_or_before(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return 0;  // t < 0 handled by caller
        return static_cast<std::size_t>(it - times_.begin()) - 1;
    }

    double interp_at(Eigen::Index comp, std::size_t seg, double s) const {
        const double w = (s - times_[seg]) / (times_[seg + 1] - times_[seg]);
        return values_(static_cast<Eigen::Index>(seg), comp) * (1.0 - w) +
               values_(static_cast<Eigen::Index>(seg) + 1, comp) * w;
    }

    std::pair<std::vector<double>, Mat> truncate_at_or_before(double t) const {
        std::size_t n = 0;
        while (n < times_.size() && times_[n] <= t) ++n;
        std::vector<double> times(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(n));
        Mat vals = values_.topRows(static_cast<Eigen::Index>(n));
        return {std::move(times), std::move(vals)};
    }

    Interp interp_;
    std::vector<double> times_;
    Mat values_;
    Vec x0_;
};

/// Time grid 0 = t_0 < ... < t_k.
class Partition {
public:
    explicit Partition(std::vector<double> times) : times_(std::move(times)) {
        if (times_.size() < 2) throw InvalidParams("partition needs at least two points");
        if (times_.front() != 0.0) throw InvalidParams("partition must start at 0");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1]))
                throw InvalidParams("partition times must be strictly increasing");
    }

    static Partition uniform(double horizon, std::size_t steps) {
        if (horizon <= 0.0 || steps == 0) throw InvalidParams("uniform partition needs T > 0, steps > 0");
        std::vector<double> t(steps + 1);
        for (std::size_t i = 0; i <= steps; ++i)
            t[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
        return Partition(std::move(t));
    }

    /// Merge extra times (e.g. path knots) into the grid, dropping anything
    /// outside [0, horizon].
    Partition refined_with(const std::vector<double>& extra) const {
        std::vector<double> t = times_;
        for (double e : extra)
            if (e > 0.0 && e < times_.back()) t.push_back(e);
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
        return Partition(std::move(t));
    }

    /// Insert the midpoint of every cell.
    Partition halved() const {
        std::vector<double> t;
        t.reserve(times_.size() * 2 - 1);
        for (std::size_t i = 0; i + 1 < times_.size(); ++i) {
            t.push_back(times_[i]);
            t.push_back(0.5 * (times_[i] + times_[i + 1]));
        }
        t.push_back(times_.back());
        return Partition(std::move(t));
    }

    const std::vector<double>& times() const { return times_; }
    double horizon() const { return times_.back(); }
    std::size_t steps() const { return times_.size() - 1; }

    double mesh() const {
        double m = 0.0;
        for (std::size_t i = 1; i < times_.size(); ++i)
            m = std::max(m, times_[i] - times_[i - 1]);
        return m;
    }

private:
    std::vector<double> times_;
};

/// Sequence of partitions with strictly decreasing mesh over one horizon.
class RefinementLadder {
public:
    enum class Rule { dyadic, custom };

    RefinementLadder(std::vector<Partition> levels, Rule rule)
        : levels_(std::move(levels)), rule_(rule) {
        if (levels_.empty()) throw InvalidParams("ladder needs at least one level");
        for (std::size_t i = 1; i < levels_.size(); ++i) {
            if (!(levels_[i].mesh() < levels_[i - 1].mesh()))
                throw InvalidParams("ladder mesh must strictly decrease");
            if (levels_[i].horizon() != levels_[0].horizon())
                throw InvalidParams("ladder levels must share one horizon");
        }
    }

    /// Dyadic refinement of a base grid: halve until mesh <= 2^-20 * T or
    /// max_levels levels, whichever comes first.
    static RefinementLadder dyadic(Partition base, std::size_t max_levels = 8) {
        const double floor = base.horizon() * std::pow(2.0, -20);
        std::vector<Partition> levels{std::move(base)};
        while (levels.size() < max_levels && levels.back().mesh() * 0.5 > floor)
            levels.push_back(levels.back().halved());
        return RefinementLadder(std::move(levels), Rule::dyadic);
    }

    const std::vector<Partition>& levels() const { return levels_; }
    const Partition& finest() const { return levels_.back(); }
    Rule rule() const { return rule_; }
    double horizon() const { return levels_.front().horizon(); }

private:
    std::vector<Partition> levels_;
    Rule rule_;
};

/// Jump bounds -delta_minus < dx/x(t-) < delta_plus defining the domain.
struct OmegaConstraint {
    double delta_minus;
    double delta_plus;

    OmegaConstraint(double dm, double dp) : delta_minus(dm), delta_plus(dp) {
        if (!(dm > 0.0 && dm < 1.0)) throw InvalidParams("delta_minus must be in (0,1)");
        if (!(dp > 0.0)) throw InvalidParams("delta_plus must be > 0");
    }
};

struct OmegaReport {
    bool ok;
    double worst_down;  // most negative relative knot increment
    double worst_up;    // largest positive relative knot increment
    double time_down;
    double time_up;
};

/// Check every relative knot increment against the omega bounds,
/// componentwise. For continuous representations the knot increments sit at
/// discretization scale and the check passes for any reasonable bound.
inline OmegaReport check_omega(const CadlagPath& path, const OmegaConstraint& c) {
    OmegaReport rep{true, 0.0, 0.0, 0.0, 0.0};
    const auto& times = path.knot_times();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const Vec left = path.left_limit(times[i]);
        const Vec d = path.jump(times[i]);
        for (Eigen::Index j = 0; j < path.dim(); ++j) {
            const double r = d(j) / left(j);
            if (r < rep.worst_down) {
                rep.worst_down = r;
                rep.time_down = times[i];
            }
            if (r > rep.worst_up) {
                rep.worst_up = r;
                rep.time_up = times[i];
            }
        }
    }
    rep.ok = rep.worst_down > -c.delta_minus && rep.worst_up < c.delta_plus;
    return rep;
}

/// Piecewise constant approximation on a grid: value on [t_i, t_{i+1}) is
/// x(t_{i+1}), so a jump inside a cell is relocated to the cell's left
/// endpoint.
inline CadlagPath piecewise_approx(const CadlagPath& path, const Partition& p) {
    if (p.horizon() < path.horizon())
        throw InvalidParams("partition must cover the path horizon");
    const auto& t = p.times();
    Mat vals(static_cast<Eigen::Index>(t.size()), path.dim());
    for (std::size_t i = 0; i + 1 < t.size(); ++i)
        vals.row(static_cast<Eigen::Index>(i)) = path.value(t[i + 1]);
    vals.row(static_cast<Eigen::Index>(t.size()) - 1) = path.value(t.back());
    return CadlagPath(Interp::piecewise_constant, t, std::move(vals), path.x0());
}

struct QvResult {
    Partition grid;                   // finest level
    std::vector<Mat> cumulative;      // [x]_t at each grid point, d x d
    std::vector<double> level_deviation;  // max deviation between consecutive levels
    bool converged;
    double tolerance;
};

inline constexpr double kLadderRelTol = 1e-6;
inline constexpr double kLadderAbsTol = 1e-12;

/// Quadratic variation along a refinement ladder: at each level the running
/// sum of squared increment tensors; reports between-level stabilization and
/// returns the finest level's curve. Non-convergence is flagged, not thrown.
inline QvResult quadratic_variation(const CadlagPath& path, const RefinementLadder& ladder) {
    if (ladder.horizon() > path.horizon())
        throw InvalidParams("ladder horizon exceeds path horizon");
    const Eigen::Index d = path.dim();

    auto level_curve = [&](const Partition& p) {
        const auto& t = p.times();
        std::vector<Mat> cum(t.size());
        Mat acc = Mat::Zero(d, d);
        Vec prev = path.value(t[0]);
        cum[0] = acc;
        for (std::size_t i = 1; i < t.size(); ++i) {
            Vec cur = path.value(t[i]);
            Vec dx = cur - prev;
            acc += dx * dx.transpose();
            cum[i] = acc;
            prev = std::move(cur);
        }
        return cum;
    };

    const auto& levels = ladder.levels();
    std::vector<std::vector<Mat>> curves;
    curves.reserve(levels.size());
    for (const auto& p : levels) curves.push_back(level_curve(p));

    std::vector<double> dev;
    for (std::size_t l = 1; l < levels.size(); ++l) {
        const auto& coarse_t = levels[l - 1].times();
        const auto& fine_t = levels[l].times();
        double worst = 0.0;
        for (std::size_t i = 0; i < coarse_t.size(); ++i) {
            auto it = std::upper_bound(fine_t.begin(), fine_t.end(), coarse_t[i]);
            const std::size_t j = static_cast<std::size_t>(it - fine_t.begin()) - 1;
            worst = std::max(worst, (curves[l][j] - curves[l - 1][i]).norm());
        }
        dev.push_back(worst);
    }

    const double scale = curves.back().back().norm();
    const double tol = std::max(kLadderAbsTol, kLadderRelTol * scale);
    const bool converged = dev.empty() || dev.back() <= tol;
    return QvResult{levels.back(), std::move(curves.back()), std::move(dev), converged, tol};
}

}  // namespace pathfolio
