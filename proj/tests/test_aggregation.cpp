#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pathfolio/aggregation.hpp"
#include "pathfolio/generators.hpp"

using namespace pathfolio;

namespace {

CadlagPath best_stock_step() {
    // two assets, terminal ratios 1.1 and 0.9
    Mat v(3, 2);
    v << 100, 100, 110, 90, 110, 90;
    return CadlagPath(Interp::piecewise_constant, {0.0, 0.5, 1.0}, v);
}

CadlagPath random_step(std::mt19937_64& rng, Eigen::Index d, int max_jumps = 50) {
    std::uniform_real_distribution<double> ujump(-0.25, 0.25);
    std::uniform_int_distribution<int> ucount(1, max_jumps);
    std::uniform_real_distribution<double> ut(0.01, 0.99);
    StepParams sp;
    sp.x0 = Vec::Constant(d, 100.0);
    std::vector<double> times;
    const int n = ucount(rng);
    for (int i = 0; i < n; ++i) times.push_back(ut(rng));
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (double t : times) {
        Vec f(d);
        for (Eigen::Index j = 0; j < d; ++j) f(j) = 1.0 + ujump(rng);
        sp.jumps.push_back({t, f});
    }
    return generate_step(sp);
}

std::vector<StrategyPtr> family(Eigen::Index m, Eigen::Index d) {
    std::vector<StrategyPtr> out;
    for (Eigen::Index k = 0; k < m; ++k) {
        switch (k % 5) {
            case 0: out.push_back(make_single_stock(1 + (k % d))); break;
            case 1: out.push_back(make_market_index()); break;
            case 2: out.push_back(make_simple_average(1 + (k % d), 1.0)); break;
            case 3: out.push_back(make_exponential_average(1 + (k % d), 1.5)); break;
            default: out.push_back(make_softmax()); break;
        }
    }
    return out;
}

Vec random_interior(std::mt19937_64& rng, Eigen::Index m) {
    std::exponential_distribution<double> e(1.0);
    Vec b(m);
    for (Eigen::Index k = 0; k < m; ++k) b(k) = e(rng) + 1e-3;
    return b / b.sum();
}

std::vector<WealthCurve> child_curves(const std::vector<StrategyPtr>& kids,
                                      const CadlagPath& p, const Partition& grid) {
    std::vector<WealthCurve> out;
    for (const auto& k : kids) out.push_back(wealth_discrete(*k, p, grid));
    return out;
}

}  // namespace

TEST_CASE("aggregating one child is the identity") {
    std::vector<StrategyPtr> kids;
    kids.push_back(make_market_index());
    Vec b(1);
    b << 1.0;
    auto agg = laissez_faire(std::move(kids), b);
    CadlagPath p = best_stock_step();
    for (double t : {0.0, 0.3, 0.7}) {
        Vec a = eval(*agg, t, p);
        Vec c = eval(*make_market_index(), t, p);
        CHECK((a - c).norm() < 1e-15);
    }
}

TEST_CASE("identical children collapse to the child") {
    std::vector<StrategyPtr> kids;
    kids.push_back(make_softmax());
    kids.push_back(make_softmax());
    Vec b(2);
    b << 0.3, 0.7;
    auto agg = laissez_faire(std::move(kids), b);
    CadlagPath p = best_stock_step();
    Vec a = eval(*agg, 0.7, p);
    Vec c = eval(*make_softmax(), 0.7, p);
    CHECK((a - c).norm() < 1e-14);
}

TEST_CASE("best-stock aggregate weights follow the closed formula") {
    std::vector<StrategyPtr> kids;
    kids.push_back(make_single_stock(1));
    kids.push_back(make_single_stock(2));
    Vec b(2);
    b << 0.5, 0.5;
    auto agg = laissez_faire(std::move(kids), b);
    CadlagPath p = best_stock_step();
    // after the jump: ratios (1.1, 0.9), weights proportional to b_i * ratio_i
    Vec th = eval(*agg, 0.7, p);
    CHECK(th(0) == doctest::Approx(0.5 * 1.1 / (0.5 * 1.1 + 0.5 * 0.9)).epsilon(1e-14));
    CHECK(th(1) == doctest::Approx(0.5 * 0.9 / (0.5 * 1.1 + 0.5 * 0.9)).epsilon(1e-14));
    // wealth at the horizon is exactly the mixture of the price ratios
    WealthCurve w = wealth_discrete(*agg, p, natural_partition(p));
    CHECK(w.values.back() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("aggregate wealth equals the wealth mixture on random step paths") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 40; ++rep) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 3);
        const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng() % 4);
        CadlagPath p = random_step(rng, d);
        auto kids = family(m, d);
        Vec b = random_interior(rng, m);
        std::vector<StrategyPtr> copy;
        for (const auto& k : kids) copy.push_back(k->clone());
        auto agg = laissez_faire(std::move(copy), b);
        Partition grid = natural_partition(p);
        WealthCurve aw = wealth_discrete(*agg, p, grid);
        double err = verify_mixture(aw, child_curves(kids, p, grid), b);
        CHECK(err < 1e-12);
    }
}

TEST_CASE("tracking ratio respects the 1/min b bound") {
    CadlagPath p = best_stock_step();
    std::vector<StrategyPtr> kids;
    kids.push_back(make_single_stock(1));
    kids.push_back(make_single_stock(2));
    Vec b(2);
    b << 0.5, 0.5;
    Partition grid = natural_partition(p);
    auto children = child_curves(kids, p, grid);
    std::vector<StrategyPtr> copy;
    for (const auto& k : kids) copy.push_back(k->clone());
    WealthCurve aw = wealth_discrete(*laissez_faire(std::move(copy), b), p, grid);
    TrackingReport tr = tracking_report(children, aw, b);
    CHECK(tr.bound == doctest::Approx(2.0));
    CHECK(tr.w_star_final == doctest::Approx(1.1));
    CHECK(tr.ratio.back() == doctest::Approx(1.1).epsilon(1e-14));
    for (double r : tr.ratio) {
        CHECK(r >= 1.0 - 1e-12);
        CHECK(r <= tr.bound + 1e-9);
    }

    Vec boundary(2);
    boundary << 1.0, 0.0;
    CHECK_THROWS_AS(tracking_report(children, aw, boundary), InvalidParams);
}

TEST_CASE("tracking ratio of identical children is one") {
    CadlagPath p = best_stock_step();
    std::vector<StrategyPtr> kids;
    kids.push_back(make_market_index());
    kids.push_back(make_market_index());
    Vec b(2);
    b << 0.4, 0.6;
    Partition grid = natural_partition(p);
    auto children = child_curves(kids, p, grid);
    std::vector<StrategyPtr> copy;
    for (const auto& k : kids) copy.push_back(k->clone());
    WealthCurve aw = wealth_discrete(*laissez_faire(std::move(copy), b), p, grid);
    TrackingReport tr = tracking_report(children, aw, b);
    for (double r : tr.ratio) CHECK(r == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("nested aggregation equals flat aggregation with product weights") {
    CadlagPath p = best_stock_step();
    Vec outer(2), inner(2), flat(3);
    inner << 0.25, 0.75;
    outer << 0.4, 0.6;
    // flat = (outer_0, outer_1 * inner_0, outer_1 * inner_1)
    flat << 0.4, 0.6 * 0.25, 0.6 * 0.75;

    std::vector<StrategyPtr> inner_kids;
    inner_kids.push_back(make_market_index());
    inner_kids.push_back(make_single_stock(2));
    std::vector<StrategyPtr> outer_kids;
    outer_kids.push_back(make_single_stock(1));
    outer_kids.push_back(laissez_faire(std::move(inner_kids), inner));
    auto nested = laissez_faire(std::move(outer_kids), outer);

    std::vector<StrategyPtr> flat_kids;
    flat_kids.push_back(make_single_stock(1));
    flat_kids.push_back(make_market_index());
    flat_kids.push_back(make_single_stock(2));
    auto flattened = laissez_faire(std::move(flat_kids), flat);

    for (double t : {0.0, 0.2, 0.5, 0.9}) {
        Vec a = eval(*nested, t, p);
        Vec c = eval(*flattened, t, p);
        CHECK((a - c).norm() < 1e-10);
    }
    Partition grid = natural_partition(p);
    WealthCurve wn = wealth_discrete(*nested, p, grid);
    WealthCurve wf = wealth_discrete(*flattened, p, grid);
    CHECK(wn.values.back() == doctest::Approx(wf.values.back()).epsilon(1e-12));
}

TEST_CASE("tracking rate decays like log(horizon)/horizon") {
    GbmParams g;
    g.x0 = Vec::Constant(2, 1.0);
    g.mu = Vec::Zero(2);
    g.sigma = Vec::Constant(2, 0.4);
    double prev_rate = std::numeric_limits<double>::infinity();
    for (double T : {1.0, 10.0, 100.0}) {
        g.horizon = T;
        g.steps = static_cast<std::size_t>(512 * T);
        CadlagPath p = generate_gbm(g, 77);
        std::vector<StrategyPtr> kids;
        kids.push_back(make_single_stock(1));
        kids.push_back(make_single_stock(2));
        Vec b(2);
        b << 0.5, 0.5;
        Partition grid = natural_partition(p);
        auto children = child_curves(kids, p, grid);
        std::vector<StrategyPtr> copy;
        for (const auto& k : kids) copy.push_back(k->clone());
        WealthCurve aw = wealth_discrete(*laissez_faire(std::move(copy), b), p, grid);
        TrackingReport tr = tracking_report(children, aw, b);
        CHECK(tr.rate <= std::log(2.0) / T + 1e-12);
        CHECK(tr.rate < prev_rate);
        prev_rate = tr.rate;
    }
}

TEST_CASE("minimax: one scenario is beaten exactly") {
    CadlagPath p = best_stock_step();
    auto s1 = make_single_stock(1);
    auto s2 = make_single_stock(2);
    MinimaxResult r = minimax_weights({s1.get(), s2.get()}, {p});
    // put everything on the winner: ratio 1 is attainable
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.b_star(0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("minimax: symmetric scenarios give symmetric weights") {
    Mat v1(3, 2), v2(3, 2);
    v1 << 100, 100, 110, 90, 110, 90;
    v2 << 100, 100, 90, 110, 90, 110;
    CadlagPath a(Interp::piecewise_constant, {0.0, 0.5, 1.0}, v1);
    CadlagPath b(Interp::piecewise_constant, {0.0, 0.5, 1.0}, v2);
    auto s1 = make_single_stock(1);
    auto s2 = make_single_stock(2);
    MinimaxResult r = minimax_weights({s1.get(), s2.get()}, {a, b});
    CHECK(r.b_star(0) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(r.b_star(1) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(r.value == doctest::Approx(1.1 / (0.5 * 1.1 + 0.5 * 0.9)).epsilon(1e-6));
    CHECK_THROWS_AS(minimax_weights({s1.get(), s2.get()}, {}), EmptyScenarioSet);
}

TEST_CASE("minimax matches a dense grid search on a random instance") {
    std::mt19937_64 rng(5);
    std::vector<CadlagPath> scenarios;
    for (int i = 0; i < 5; ++i) scenarios.push_back(random_step(rng, 2, 12));
    auto s1 = make_single_stock(1);
    auto s2 = make_single_stock(2);
    auto s3 = make_market_index();
    std::vector<const Strategy*> strats{s1.get(), s2.get(), s3.get()};
    MinimaxResult r = minimax_weights(strats, scenarios);

    // brute force over the 2-simplex
    Mat wealths(3, 5);
    for (int j = 0; j < 5; ++j) {
        Partition grid = natural_partition(scenarios[static_cast<std::size_t>(j)]);
        for (int k = 0; k < 3; ++k)
            wealths(k, j) = wealth_discrete(*strats[static_cast<std::size_t>(k)],
                                            scenarios[static_cast<std::size_t>(j)], grid)
                                .values.back();
    }
    double best = std::numeric_limits<double>::infinity();
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
        for (int j = 0; i + j <= n; ++j) {
            Vec b(3);
            b << double(i) / n, double(j) / n, double(n - i - j) / n;
            double worst = 0.0;
            for (int sc = 0; sc < 5; ++sc) {
                const double mix = b.dot(wealths.col(sc));
                if (mix <= 0.0) {
                    worst = std::numeric_limits<double>::infinity();
                    break;
                }
                worst = std::max(worst, wealths.col(sc).maxCoeff() / mix);
            }
            best = std::min(best, worst);
        }
    }
    CHECK(r.value == doctest::Approx(best).epsilon(1e-3));
}

TEST_CASE("insured aggregation: endpoint mixes and the exact identity") {
    CadlagPath p = best_stock_step();
    Partition grid = Partition::uniform(1.0, 64).refined_with(p.knot_times());
    auto child = make_single_stock(1);

    InsuredResult hold = best_final_vs_time_average(*child, 1.0, 0.0, p, grid);
    CHECK(hold.max_identity_error < 1e-12);
    WealthCurve wh = wealth_discrete(*hold.aggregate, p, grid);
    CHECK(wh.values.back() == doctest::Approx(1.1).epsilon(1e-12));

    InsuredResult avg = best_final_vs_time_average(*child, 1.0, 1.0, p, grid);
    CHECK(avg.max_identity_error < 1e-12);
    WealthCurve wa = wealth_discrete(*avg.aggregate, p, grid);
    // time average of the running ratio: 1.0 on [0, 0.5), 1.1 afterwards
    CHECK(wa.values.back() == doctest::Approx(0.5 * 1.0 + 0.5 * 1.1).epsilon(1e-3));

    InsuredResult mid = best_final_vs_time_average(*child, 1.0, 0.4, p, grid);
    CHECK(mid.max_identity_error < 1e-10);
    WealthCurve wm = wealth_discrete(*mid.aggregate, p, grid);
    CHECK(wm.values.back() ==
          doctest::Approx(0.6 * wh.values.back() + 0.4 * wa.values.back()).epsilon(1e-10));

    // constant path: both legs are worth exactly one
    Mat fv(2, 2);
    fv << 50, 50, 50, 50;
    CadlagPath flat(Interp::piecewise_constant, {0.0, 1.0}, fv);
    Partition fgrid = Partition::uniform(1.0, 16);
    InsuredResult fl = best_final_vs_time_average(*make_market_index(), 1.0, 0.5, flat, fgrid);
    WealthCurve wf = wealth_discrete(*fl.aggregate, flat, fgrid);
    CHECK(wf.values.back() == doctest::Approx(1.0).epsilon(1e-12));

    CHECK_THROWS_AS(best_final_vs_time_average(*child, 1.0, 1.5, p, grid), InvalidParams);
    CHECK_THROWS_AS(best_final_vs_time_average(*child, -1.0, 0.5, p, grid), InvalidHorizon);
}
