#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pathfolio/aggregation.hpp"
#include "pathfolio/generators.hpp"
#include "pathfolio/universal.hpp"
#include "pathfolio/wealth.hpp"

namespace pathfolio {

using nlohmann::json;

/// Shortest round-trip decimal for deterministic text output.
inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Reads (time, price...) rows into a piecewise-constant path. A non-numeric
/// first row is treated as a header. If the first time is positive, the
/// first row's prices extend back to t = 0. Row numbers in errors are
/// 1-based over the physical file.
inline CadlagPath ingest_csv(std::istream& in) {
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> fields;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
                    ++pos;
                if (pos != cell.size()) {
                    numeric = false;
                    break;
                }
                fields.push_back(v);
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (times.empty() && rows.empty() && lineno == 1) continue;  // header
            throw MalformedRow(lineno);
        }
        if (fields.size() < 2) throw MalformedRow(lineno);
        if (width == 0) width = fields.size();
        if (fields.size() != width) throw MalformedRow(lineno);
        if (!times.empty() && !(fields[0] > times.back())) throw NonMonotoneTime(lineno);
        for (std::size_t j = 1; j < fields.size(); ++j)
            if (!(fields[j] > 0.0)) throw NonPositivePrice(lineno);
        times.push_back(fields[0]);
        rows.push_back(std::vector<double>(fields.begin() + 1, fields.end()));
    }
    if (times.empty()) throw MalformedRow(0);
    if (times.front() < 0.0) throw NonMonotoneTime(1);
    if (times.front() > 0.0) {
        times.insert(times.begin(), 0.0);
        rows.insert(rows.begin(), rows.front());
    }
    const Eigen::Index d = static_cast<Eigen::Index>(width - 1);
    Mat vals(static_cast<Eigen::Index>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            vals(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return CadlagPath(Interp::piecewise_constant, std::move(times), std::move(vals));
}

inline CadlagPath ingest_csv_file(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw InvalidParams("cannot open CSV file: " + filename);
    return ingest_csv(in);
}

// ---------------------------------------------------------------------------
// Path JSON
// ---------------------------------------------------------------------------

inline std::string interp_name(Interp i) {
    switch (i) {
        case Interp::piecewise_constant: return "piecewise_constant";
        case Interp::piecewise_linear: return "piecewise_linear";
        default: return "sampled_dense";
    }
}

inline Interp interp_from_name(const std::string& s) {
    if (s == "piecewise_constant") return Interp::piecewise_constant;
    if (s == "piecewise_linear") return Interp::piecewise_linear;
    if (s == "sampled_dense") return Interp::sampled_dense;
    throw UnknownKind("unknown interpolation: " + s);
}

inline json path_to_json(const CadlagPath& path) {
    json j;
    j["dim"] = path.dim();
    j["interpolation"] = interp_name(path.interp());
    j["x0"] = std::vector<double>(path.x0().data(), path.x0().data() + path.dim());
    json knots = json::array();
    const auto& t = path.knot_times();
    for (std::size_t i = 0; i < t.size(); ++i) {
        json row = json::array();
        row.push_back(t[i]);
        for (Eigen::Index c = 0; c < path.dim(); ++c)
            row.push_back(path.knot_values()(static_cast<Eigen::Index>(i), c));
        knots.push_back(std::move(row));
    }
    j["knots"] = std::move(knots);
    return j;
}

inline CadlagPath path_from_json(const json& j) {
    const Interp interp = interp_from_name(j.at("interpolation").get<std::string>());
    const auto& knots = j.at("knots");
    if (!knots.is_array() || knots.empty()) throw InvalidParams("path json: knots missing");
    const std::size_t cols = knots[0].size();
    if (cols < 2) throw InvalidParams("path json: knot rows need [t, v...]");
    std::vector<double> times;
    Mat vals(static_cast<Eigen::Index>(knots.size()), static_cast<Eigen::Index>(cols - 1));
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (knots[i].size() != cols) throw InvalidParams("path json: ragged knot rows");
        times.push_back(knots[i][0].get<double>());
        for (std::size_t c = 1; c < cols; ++c)
            vals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c - 1)) =
                knots[i][c].get<double>();
    }
    Vec x0;
    if (j.contains("x0")) {
        const auto v = j["x0"].get<std::vector<double>>();
        x0 = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    return CadlagPath(interp, std::move(times), std::move(vals), std::move(x0));
}

// ---------------------------------------------------------------------------
// Generators from JSON
// ---------------------------------------------------------------------------

inline Vec vec_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// { kind: gbm | jump_diffusion | step | adversarial_zigzag, ... }
inline CadlagPath generate_from_json(const json& j, std::uint64_t seed) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "gbm") {
        GbmParams p;
        p.x0 = vec_from_json(j.at("x0"));
        p.mu = vec_from_json(j.at("mu"));
        p.sigma = vec_from_json(j.at("sigma"));
        if (j.contains("corr")) {
            const auto rows = j["corr"].get<std::vector<std::vector<double>>>();
            p.corr.resize(static_cast<Eigen::Index>(rows.size()),
                          static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size())
                    throw InvalidParams("gbm: corr must be square");
                for (std::size_t c = 0; c < rows.size(); ++c)
                    p.corr(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                        rows[r][c];
            }
        }
        p.horizon = j.value("horizon", 1.0);
        p.steps = j.value("steps", std::size_t{256});
        return generate_gbm(p, seed);
    }
    if (kind == "jump_diffusion") {
        JumpDiffusionParams p;
        p.x0 = vec_from_json(j.at("x0"));
        p.mu = vec_from_json(j.at("mu"));
        p.sigma = vec_from_json(j.at("sigma"));
        p.horizon = j.value("horizon", 1.0);
        p.steps = j.value("steps", std::size_t{256});
        p.jump_intensity = j.value("jump_intensity", 1.0);
        p.omega = OmegaConstraint(j.value("delta_minus", 0.3), j.value("delta_plus", 0.3));
        return generate_jump_diffusion(p, seed);
    }
    if (kind == "step") {
        StepParams p;
        p.x0 = vec_from_json(j.at("x0"));
        p.horizon = j.value("horizon", 1.0);
        if (j.contains("jumps"))
            for (const auto& row : j["jumps"])
                p.jumps.push_back(StepJump{row.at("time").get<double>(),
                                           vec_from_json(row.at("factor"))});
        return generate_step(p);
    }
    if (kind == "adversarial_zigzag") {
        ZigzagParams p;
        p.x0 = vec_from_json(j.at("x0"));
        p.horizon = j.value("horizon", 1.0);
        p.steps = j.value("steps", std::size_t{64});
        p.amplitude = j.value("amplitude", 0.05);
        return generate_zigzag(p);
    }
    throw UnknownKind("unknown generator kind: " + kind);
}

// ---------------------------------------------------------------------------
// Strategy specs from JSON
// ---------------------------------------------------------------------------

/// { kind, ... } with nested children for the combining strategies.
inline StrategyPtr strategy_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "cash") return make_pure_cash();
    if (kind == "single_stock") return make_single_stock(j.at("asset").get<Eigen::Index>());
    if (kind == "market_index") return make_market_index();
    if (kind == "simple_average")
        return make_simple_average(j.at("asset").get<Eigen::Index>(),
                                   j.at("horizon").get<double>());
    if (kind == "exponential_average")
        return make_exponential_average(j.at("asset").get<Eigen::Index>(),
                                        j.at("lambda").get<double>());
    if (kind == "portfolio_of_portfolio")
        return make_portfolio_of_portfolio(strategy_from_json(j.at("child")),
                                           j.at("horizon").get<double>());
    if (kind == "softmax") return make_softmax();
    if (kind == "stopped")
        return make_stopped(strategy_from_json(j.at("child")), j.at("horizon").get<double>());
    if (kind == "convex_combination" || kind == "laissez_faire") {
        std::vector<StrategyPtr> children;
        for (const auto& c : j.at("children")) children.push_back(strategy_from_json(c));
        Vec b = vec_from_json(j.at("b"));
        if (kind == "convex_combination")
            return make_convex_combination(std::move(children), SimplexPoint(b));
        return laissez_faire(std::move(children), std::move(b));
    }
    throw UnknownKind("unknown strategy kind: " + kind);
}

/// { kind, asset?, horizon?, lambda?, child? } for the closed-form oracles.
inline ClosedFormSpec closed_form_from_json(const json& j) {
    ClosedFormSpec spec;
    spec.kind = j.at("kind").get<std::string>();
    spec.asset = j.value("asset", Eigen::Index{1});
    spec.horizon = j.value("horizon", 1.0);
    spec.lambda = j.value("lambda", 1.0);
    if (j.contains("child"))
        spec.child = std::make_shared<ClosedFormSpec>(closed_form_from_json(j["child"]));
    return spec;
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

inline std::string wealth_curve_csv(const WealthCurve& w) {
    std::string out = "t,V,level_deviation\n";
    const double dev = w.level_deviation.empty() ? 0.0 : w.level_deviation.back();
    const auto& t = w.partition.times();
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += fmt_double(t[i]);
        out += ',';
        out += fmt_double(w.values[i]);
        out += ',';
        out += fmt_double(dev);
        out += '\n';
    }
    return out;
}

inline json wealth_curve_json(const WealthCurve& w) {
    json j;
    j["xi"] = w.xi;
    j["times"] = w.partition.times();
    j["values"] = w.values;
    j["diagnostics"] = {{"level_deviation", w.level_deviation},
                        {"converged", w.converged},
                        {"tolerance", w.tolerance}};
    return j;
}

inline std::string universal_csv(const UniversalResult& r) {
    std::string out = "t,w_hat,w_star,ratio,bracket_lo,bracket_hi\n";
    const auto& t = r.partition.times();
    for (std::size_t i = 0; i < t.size(); ++i) {
        out += fmt_double(t[i]);
        out += ',';
        out += fmt_double(r.w_hat[i]);
        out += ',';
        out += fmt_double(r.w_node_max[i]);
        out += ',';
        out += fmt_double(r.w_hat[i] / r.w_node_max[i]);
        out += ',';
        out += fmt_double(r.bracket_lo);
        out += ',';
        out += fmt_double(r.bracket_hi);
        out += '\n';
    }
    return out;
}

inline json universal_json(const UniversalResult& r) {
    json j;
    j["b_star"] = std::vector<double>(r.b_star.data(), r.b_star.data() + r.b_star.size());
    j["w_star"] = r.w_star;
    j["log_w_star"] = r.log_w_star;
    j["w_hat_final"] = r.w_hat.back();
    j["ratio"] = r.ratio;
    j["interior"] = r.interior;
    j["mc_stderr"] = r.mc_stderr;
    j["bracket"] = {r.bracket_lo, r.bracket_hi};
    j["bracket_stderr"] = {r.bracket_lo_err, r.bracket_hi_err};
    j["gram"] = {{"lambda_min", r.gram.lambda_min}, {"lambda_max", r.gram.lambda_max}};
    return j;
}

inline void write_file(const std::string& filename, const std::string& content) {
    std::ofstream out(filename, std::ios::binary);
    if (!out) throw InvalidParams("cannot write file: " + filename);
    out << content;
}

}  // namespace pathfolio
