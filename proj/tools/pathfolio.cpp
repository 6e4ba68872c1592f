// Batch front door: runs wealth backtests, laissez-faire aggregation,
// universal-portfolio experiments, self-financing verification, and
// asymptotics sweeps from a JSON config. Data-only output (CSV/JSON);
// identical config and seed give byte-identical files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pathfolio/io.hpp"

namespace {

using namespace pathfolio;
using nlohmann::json;

struct Options {
    std::string config_file;
    std::string outdir;
    long long seed_override = -1;
    int verbosity = 0;
};

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDomain = 3;

json load_config(const Options& opt) {
    std::ifstream in(opt.config_file);
    if (!in) throw InvalidParams("cannot open config file: " + opt.config_file);
    json j;
    in >> j;
    return j;
}

std::uint64_t effective_seed(const json& cfg, const Options& opt) {
    if (opt.seed_override >= 0) return static_cast<std::uint64_t>(opt.seed_override);
    if (cfg.contains("seed")) return cfg["seed"].get<std::uint64_t>();
    throw InvalidParams("config needs a seed (or pass --seed)");
}

CadlagPath load_path(const json& cfg, std::uint64_t seed) {
    const auto& p = cfg.at("path");
    int sources = 0;
    for (const char* key : {"generator", "csv", "knots_json"})
        if (p.contains(key)) ++sources;
    if (sources != 1)
        throw InvalidParams("config path must have exactly one of: generator, csv, knots_json");
    if (p.contains("generator")) return generate_from_json(p["generator"], seed);
    if (p.contains("csv")) return ingest_csv_file(p["csv"].get<std::string>());
    return path_from_json(p["knots_json"]);
}

Partition make_partition(const json& cfg, const CadlagPath& path) {
    if (cfg.contains("partition")) {
        const auto& pc = cfg["partition"];
        const double horizon = pc.value("horizon", path.horizon());
        const std::size_t steps = pc.value("steps", std::size_t{256});
        return Partition::uniform(horizon, steps).refined_with(path.knot_times());
    }
    std::vector<double> t = path.knot_times();
    if (t.size() < 2) t.push_back(std::max(path.horizon(), 1.0));
    return Partition(std::move(t));
}

RefinementLadder make_ladder(const json& cfg, const CadlagPath& path) {
    std::size_t base = 64, max_levels = 8;
    double horizon = path.horizon() > 0.0 ? path.horizon() : 1.0;
    if (cfg.contains("ladder")) {
        base = cfg["ladder"].value("base_steps", base);
        max_levels = cfg["ladder"].value("max_levels", max_levels);
        horizon = cfg["ladder"].value("horizon", horizon);
    }
    return RefinementLadder::dyadic(Partition::uniform(horizon, base), max_levels);
}

OmegaConstraint make_omega(const json& cfg) {
    if (!cfg.contains("omega")) return OmegaConstraint(0.3, 0.3);
    return OmegaConstraint(cfg["omega"].value("delta_minus", 0.3),
                           cfg["omega"].value("delta_plus", 0.3));
}

Quadrature make_quadrature(const json& cfg, std::uint64_t seed) {
    Quadrature q;
    q.seed = seed;
    if (cfg.contains("quadrature")) {
        const auto& qc = cfg["quadrature"];
        const std::string kind = qc.value("kind", std::string("mc"));
        if (kind == "mc")
            q.kind = Quadrature::Kind::mc;
        else if (kind == "grid")
            q.kind = Quadrature::Kind::grid;
        else
            throw UnknownKind("unknown quadrature kind: " + kind);
        q.nodes = qc.value("nodes", q.nodes);
        q.resolution = qc.value("resolution", q.resolution);
        if (qc.contains("seed")) q.seed = qc["seed"].get<std::uint64_t>();
    }
    return q;
}

std::vector<StrategyPtr> load_strategies(const json& cfg) {
    std::vector<StrategyPtr> out;
    if (cfg.contains("strategies"))
        for (const auto& s : cfg["strategies"]) out.push_back(strategy_from_json(s));
    else if (cfg.contains("strategy"))
        out.push_back(strategy_from_json(cfg["strategy"]));
    if (out.empty()) throw InvalidParams("config needs strategy or strategies");
    return out;
}

void emit(const Options& opt, const std::string& name, const std::string& content) {
    const auto path = std::filesystem::path(opt.outdir) / name;
    write_file(path.string(), content);
    if (opt.verbosity > 0) std::cerr << "wrote " << path.string() << "\n";
}

int cmd_wealth(const json& cfg, const Options& opt) {
    const std::uint64_t seed = effective_seed(cfg, opt);
    const CadlagPath path = load_path(cfg, seed);
    const auto strategies = load_strategies(cfg);
    const RefinementLadder ladder = make_ladder(cfg, path);
    const double xi = cfg.value("xi", 1.0);

    const WealthCurve w = wealth_limit(*strategies[0], path, ladder, kLadderRelTol, xi);
    emit(opt, "wealth.csv", wealth_curve_csv(w));
    json report = wealth_curve_json(w);

    if (cfg.contains("oracle")) {
        const ClosedFormSpec spec = closed_form_from_json(cfg["oracle"]);
        json table = json::array();
        for (double t : w.partition.times()) {
            const double v = closed_form_wealth(spec, path, t) * xi;
            table.push_back({{"t", t}, {"oracle", v}});
        }
        const double oracle_final = closed_form_wealth(spec, path, w.partition.horizon()) * xi;
        report["oracle"] = {{"kind", spec.kind},
                            {"final", oracle_final},
                            {"relative_error",
                             std::abs(w.values.back() - oracle_final) / oracle_final}};
        emit(opt, "oracle.json", json(table).dump(2) + "\n");
    }

    const Partition p = make_partition(cfg, path);
    const SelfFinancingReport sf = verify_self_financing(*strategies[0], path, p, xi);
    report["self_financing"] = {{"max_rebalancing", sf.max_rebalancing},
                                {"max_ppde", sf.max_ppde},
                                {"max_horizontal", sf.max_horizontal},
                                {"epsilon", sf.epsilon}};
    emit(opt, "wealth.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_aggregate(const json& cfg, const Options& opt) {
    const std::uint64_t seed = effective_seed(cfg, opt);
    const CadlagPath path = load_path(cfg, seed);
    const auto strategies = load_strategies(cfg);
    const Partition p = make_partition(cfg, path);
    Vec b;
    if (cfg.contains("b"))
        b = vec_from_json(cfg["b"]);
    else
        b = Vec::Constant(static_cast<Eigen::Index>(strategies.size()),
                          1.0 / static_cast<double>(strategies.size()));

    std::vector<StrategyPtr> clones;
    for (const auto& s : strategies) clones.push_back(s->clone());
    const StrategyPtr agg = laissez_faire(std::move(clones), b);
    const WealthCurve aw = wealth_discrete(*agg, path, p);
    std::vector<WealthCurve> cw;
    for (const auto& s : strategies) cw.push_back(wealth_discrete(*s, path, p));

    json report;
    report["mixture_error"] = verify_mixture(aw, cw, b);
    const TrackingReport tr = tracking_report(cw, aw, b);
    report["tracking"] = {{"bound", tr.bound},
                          {"w_star_final", tr.w_star_final},
                          {"log_ratio_final", tr.log_ratio_final},
                          {"rate", tr.rate}};

    std::string csv = "t,w_hat,w_star,ratio\n";
    const auto& ts = p.times();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double ws = 0.0;
        for (const auto& c : cw) ws = std::max(ws, c.values[i]);
        csv += fmt_double(ts[i]);
        csv += ',';
        csv += fmt_double(aw.values[i]);
        csv += ',';
        csv += fmt_double(ws);
        csv += ',';
        csv += fmt_double(ws / aw.values[i]);
        csv += '\n';
    }
    emit(opt, "aggregate.csv", csv);

    if (cfg.contains("scenarios")) {
        std::vector<CadlagPath> scen;
        std::uint64_t s = seed;
        for (const auto& sj : cfg["scenarios"]) {
            if (sj.contains("csv"))
                scen.push_back(ingest_csv_file(sj["csv"].get<std::string>()));
            else
                scen.push_back(generate_from_json(sj, ++s));
        }
        std::vector<const Strategy*> fam;
        for (const auto& st : strategies) fam.push_back(st.get());
        const MinimaxResult mm = minimax_weights(fam, scen, seed);
        report["minimax"] = {
            {"b_star",
             std::vector<double>(mm.b_star.data(), mm.b_star.data() + mm.b_star.size())},
            {"value", mm.value}};
    }
    emit(opt, "aggregate.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_universal(const json& cfg, const Options& opt) {
    const std::uint64_t seed = effective_seed(cfg, opt);
    const CadlagPath path = load_path(cfg, seed);
    const auto strategies = load_strategies(cfg);
    const Partition p = make_partition(cfg, path);
    const Quadrature q = make_quadrature(cfg, seed);
    const OmegaConstraint omega = make_omega(cfg);

    std::vector<const Strategy*> fam;
    for (const auto& s : strategies) fam.push_back(s.get());
    const UniversalResult res = universal_portfolio(fam, path, p, q, omega);
    emit(opt, "universal.csv", universal_csv(res));
    json report = universal_json(res);
    if (res.interior && res.gram.lambda_min / res.gram.lambda_max >= 1e-10) {
        const bool continuous = path.interp() != Interp::piecewise_constant;
        const RatioVerdict v = exact_ratio_check(res, res.gram, omega.delta_minus,
                                                 omega.delta_plus, 0.05, 1 << 16,
                                                 seed + 1, continuous);
        report["bracket_verdict"] = {{"ok", v.bracket_ok},
                                     {"lower", v.lower},
                                     {"upper", v.upper},
                                     {"ratio", v.ratio}};
        if (v.checked_continuous)
            report["continuous_verdict"] = {{"ok", v.continuous_ok},
                                            {"gaussian_ratio", v.continuous_value},
                                            {"relative_error", v.continuous_rel_err}};
    }
    emit(opt, "universal.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_verify(const json& cfg, const Options& opt) {
    const std::uint64_t seed = effective_seed(cfg, opt);
    const CadlagPath path = load_path(cfg, seed);
    const auto strategies = load_strategies(cfg);
    const Partition p = make_partition(cfg, path);
    const RefinementLadder ladder = make_ladder(cfg, path);
    const OmegaConstraint omega = make_omega(cfg);

    json report;
    const OmegaReport om = check_omega(path, omega);
    report["omega"] = {{"ok", om.ok},
                       {"worst_down", om.worst_down},
                       {"worst_up", om.worst_up}};
    const QvResult qv = quadratic_variation(path, ladder);
    report["quadratic_variation"] = {{"converged", qv.converged},
                                     {"tolerance", qv.tolerance},
                                     {"level_deviation", qv.level_deviation}};
    const SelfFinancingReport sf = verify_self_financing(*strategies[0], path, p);
    report["self_financing"] = {{"max_rebalancing", sf.max_rebalancing},
                                {"max_ppde", sf.max_ppde},
                                {"max_horizontal", sf.max_horizontal},
                                {"epsilon", sf.epsilon}};
    if (!om.ok) {
        emit(opt, "verify.json", report.dump(2) + "\n");
        std::cerr << "omega violation: worst down " << om.worst_down << ", worst up "
                  << om.worst_up << "\n";
        return kExitDomain;
    }
    const ItoDecomposition ito = ito_decomposition(*strategies[0], path, ladder, omega);
    double recon = 0.0;
    bool bound_ok = true;
    for (std::size_t i = 0; i < ito.log_wealth.size(); ++i) {
        recon = std::max(recon, std::abs(ito.log_wealth[i] -
                                         (ito.drift[i] - ito.qv[i] + ito.jump_series[i])));
        if (std::abs(ito.jump_series[i]) > ito.bound[i] + 1e-15) bound_ok = false;
    }
    report["ito"] = {{"max_reconstruction_error", recon},
                     {"bound_ok", bound_ok},
                     {"converged", ito.converged}};
    emit(opt, "verify.json", report.dump(2) + "\n");
    return kExitOk;
}

int cmd_asymptotics(const json& cfg, const Options& opt) {
    const std::uint64_t seed = effective_seed(cfg, opt);
    const CadlagPath path = load_path(cfg, seed);
    const auto strategies = load_strategies(cfg);
    const Quadrature q = make_quadrature(cfg, seed);
    std::vector<double> horizons = cfg.value("horizons", std::vector<double>{1.0});

    std::vector<const Strategy*> fam;
    for (const auto& s : strategies) fam.push_back(s.get());
    const auto rows = asymptotics_experiment(fam, path, horizons, q);

    std::string csv = "t,log_ratio,predicted,ratio,rate,interior\n";
    json jrows = json::array();
    for (const auto& r : rows) {
        csv += fmt_double(r.t);
        csv += ',';
        csv += fmt_double(r.log_ratio);
        csv += ',';
        csv += fmt_double(r.predicted);
        csv += ',';
        csv += fmt_double(r.ratio);
        csv += ',';
        csv += fmt_double(r.rate);
        csv += ',';
        csv += r.interior ? '1' : '0';
        csv += '\n';
        jrows.push_back({{"t", r.t},
                         {"log_ratio", r.log_ratio},
                         {"predicted", r.predicted},
                         {"ratio", r.ratio},
                         {"rate", r.rate},
                         {"interior", r.interior}});
    }
    emit(opt, "asymptotics.csv", csv);
    emit(opt, "asymptotics.json", json(jrows).dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pathfolio: pathwise self-financing portfolio experiments"};
    app.require_subcommand(1);

    Options opt;
    if (const char* env = std::getenv("PATHFOLIO_OUT")) opt.outdir = env;
    if (opt.outdir.empty()) opt.outdir = ".";

    app.add_flag("-v,--verbose", opt.verbosity, "increase verbosity");
    for (const char* name : {"wealth", "aggregate", "universal", "verify", "asymptotics"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", opt.config_file, "JSON config file")->required();
        sub->add_option("-o,--out", opt.outdir, "output directory");
        sub->add_option("-s,--seed", opt.seed_override, "seed override");
    }

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(opt.outdir);
        const json cfg = load_config(opt);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "wealth") return cmd_wealth(cfg, opt);
        if (cmd == "aggregate") return cmd_aggregate(cfg, opt);
        if (cmd == "universal") return cmd_universal(cfg, opt);
        if (cmd == "verify") return cmd_verify(cfg, opt);
        return cmd_asymptotics(cfg, opt);
    } catch (const pathfolio::Ruin& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const pathfolio::OmegaViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const pathfolio::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}
