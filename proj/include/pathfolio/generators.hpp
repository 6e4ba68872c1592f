#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pathfolio/path.hpp"

namespace pathfolio {

/// Geometric Brownian motion sampled on a uniform grid.
struct GbmParams {
    Vec x0;
    Vec mu;
    Vec sigma;
    Mat corr;  // empty => identity
    double horizon = 1.0;
    std::size_t steps = 256;
};

/// Diffusion plus multiplicative jumps, emitted as a step path on a uniform
/// grid. Every relative increment is kept inside the omega bounds.
struct JumpDiffusionParams {
    Vec x0;
    Vec mu;
    Vec sigma;
    double horizon = 1.0;
    std::size_t steps = 256;
    double jump_intensity = 1.0;  // expected jumps per unit time per asset
    OmegaConstraint omega{0.3, 0.3};
};

struct StepJump {
    double time;
    Vec factor;  // multiplicative, componentwise
};

struct StepParams {
    Vec x0;
    double horizon = 1.0;
    std::vector<StepJump> jumps;
};

/// Deterministic alternating up/down moves, phase-shifted per asset.
struct ZigzagParams {
    Vec x0;
    double horizon = 1.0;
    std::size_t steps = 64;
    double amplitude = 0.05;
};

namespace detail {

inline void require_positive(const Vec& v, const char* what) {
    if (v.size() == 0 || (v.array() <= 0.0).any()) throw InvalidParams(what);
}

inline Mat chol_or_identity(const Mat& corr, Eigen::Index d) {
    if (corr.size() == 0) return Mat::Identity(d, d);
    if (corr.rows() != d || corr.cols() != d)
        throw InvalidParams("correlation matrix dimension mismatch");
    Eigen::LLT<Mat> llt(corr);
    if (llt.info() != Eigen::Success)
        throw InvalidParams("correlation matrix must be positive definite");
    return llt.matrixL();
}

}  // namespace detail

inline CadlagPath generate_gbm(const GbmParams& p, std::uint64_t seed) {
    detail::require_positive(p.x0, "gbm: x0 must be positive");
    if (p.horizon <= 0.0 || p.steps == 0) throw InvalidParams("gbm: bad horizon/steps");
    const Eigen::Index d = p.x0.size();
    if (p.mu.size() != d || p.sigma.size() != d)
        throw InvalidParams("gbm: mu/sigma dimension mismatch");
    if ((p.sigma.array() < 0.0).any()) throw InvalidParams("gbm: sigma must be >= 0");

    const Mat chol = detail::chol_or_identity(p.corr, d);
    const double dt = p.horizon / static_cast<double>(p.steps);
    const double sdt = std::sqrt(dt);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> times(p.steps + 1);
    Mat vals(static_cast<Eigen::Index>(p.steps) + 1, d);
    vals.row(0) = p.x0;
    times[0] = 0.0;
    Vec z(d), w(d);
    for (std::size_t i = 1; i <= p.steps; ++i) {
        times[i] = p.horizon * static_cast<double>(i) / static_cast<double>(p.steps);
        for (Eigen::Index j = 0; j < d; ++j) z(j) = normal(rng);
        w = chol * z;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double drift = (p.mu(j) - 0.5 * p.sigma(j) * p.sigma(j)) * dt;
            vals(static_cast<Eigen::Index>(i), j) =
                vals(static_cast<Eigen::Index>(i) - 1, j) * std::exp(drift + p.sigma(j) * sdt * w(j));
        }
    }
    return CadlagPath(Interp::sampled_dense, std::move(times), std::move(vals));
}

inline CadlagPath generate_jump_diffusion(const JumpDiffusionParams& p, std::uint64_t seed) {
    detail::require_positive(p.x0, "jump_diffusion: x0 must be positive");
    if (p.horizon <= 0.0 || p.steps == 0) throw InvalidParams("jump_diffusion: bad horizon/steps");
    const Eigen::Index d = p.x0.size();
    if (p.mu.size() != d || p.sigma.size() != d)
        throw InvalidParams("jump_diffusion: mu/sigma dimension mismatch");
    if (p.jump_intensity < 0.0) throw InvalidParams("jump_diffusion: negative intensity");

    const double dt = p.horizon / static_cast<double>(p.steps);
    const double sdt = std::sqrt(dt);
    // keep a safety margin inside the open omega interval
    const double lo = -0.95 * p.omega.delta_minus;
    const double hi = 0.95 * p.omega.delta_plus;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> times(p.steps + 1);
    Mat vals(static_cast<Eigen::Index>(p.steps) + 1, d);
    vals.row(0) = p.x0;
    times[0] = 0.0;
    const double jump_prob = 1.0 - std::exp(-p.jump_intensity * dt);
    for (std::size_t i = 1; i <= p.steps; ++i) {
        times[i] = p.horizon * static_cast<double>(i) / static_cast<double>(p.steps);
        for (Eigen::Index j = 0; j < d; ++j) {
            double rel = std::expm1((p.mu(j) - 0.5 * p.sigma(j) * p.sigma(j)) * dt +
                                    p.sigma(j) * sdt * normal(rng));
            if (unif(rng) < jump_prob) {
                // jump size uniform over the admissible relative range
                rel += lo + (hi - lo) * unif(rng);
            }
            rel = std::clamp(rel, lo, hi);
            vals(static_cast<Eigen::Index>(i), j) =
                vals(static_cast<Eigen::Index>(i) - 1, j) * (1.0 + rel);
        }
    }
    return CadlagPath(Interp::piecewise_constant, std::move(times), std::move(vals));
}

inline CadlagPath generate_step(const StepParams& p) {
    detail::require_positive(p.x0, "step: x0 must be positive");
    if (p.horizon <= 0.0) throw InvalidParams("step: bad horizon");
    const Eigen::Index d = p.x0.size();
    std::vector<double> times{0.0};
    std::vector<Vec> rows{p.x0};
    double prev_t = 0.0;
    for (const auto& j : p.jumps) {
        if (!(j.time > prev_t && j.time <= p.horizon))
            throw InvalidParams("step: jump times must be increasing within (0, horizon]");
        if (j.factor.size() != d) throw DimensionMismatch("step: jump factor dimension");
        if ((j.factor.array() <= 0.0).any()) throw InvalidParams("step: factors must be positive");
        times.push_back(j.time);
        rows.push_back(rows.back().cwiseProduct(j.factor));
        prev_t = j.time;
    }
    if (times.back() < p.horizon) {
        times.push_back(p.horizon);
        rows.push_back(rows.back());
    }
    Mat vals(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) vals.row(static_cast<Eigen::Index>(i)) = rows[i];
    return CadlagPath(Interp::piecewise_constant, std::move(times), std::move(vals));
}

inline CadlagPath generate_zigzag(const ZigzagParams& p) {
    detail::require_positive(p.x0, "zigzag: x0 must be positive");
    if (p.horizon <= 0.0 || p.steps == 0) throw InvalidParams("zigzag: bad horizon/steps");
    if (!(p.amplitude > 0.0 && p.amplitude < 1.0))
        throw InvalidParams("zigzag: amplitude must be in (0,1)");
    const Eigen::Index d = p.x0.size();
    std::vector<double> times(p.steps + 1);
    Mat vals(static_cast<Eigen::Index>(p.steps) + 1, d);
    vals.row(0) = p.x0;
    times[0] = 0.0;
    for (std::size_t i = 1; i <= p.steps; ++i) {
        times[i] = p.horizon * static_cast<double>(i) / static_cast<double>(p.steps);
        for (Eigen::Index j = 0; j < d; ++j) {
            const bool up = ((i + static_cast<std::size_t>(j)) % 2) == 0;
            const double f = up ? (1.0 + p.amplitude) : 1.0 / (1.0 + p.amplitude);
            vals(static_cast<Eigen::Index>(i), j) = vals(static_cast<Eigen::Index>(i) - 1, j) * f;
        }
    }
    return CadlagPath(Interp::piecewise_constant, std::move(times), std::move(vals));
}

}  // namespace pathfolio
