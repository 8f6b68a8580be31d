#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "obsrobust/model_io.hpp"
#include "obsrobust/param_lifting.hpp"
#include "obsrobust/robust_eval.hpp"
#include "test_support.hpp"

using namespace obsrobust;
using obsrobust::testing::random_fsc;
using obsrobust::testing::random_model;

namespace {

/// Point region around a single parameter vector.
Region point_region(const numvec& point) {
    return Region{point, point};
}

numvec random_point_in(const Region& r, Rng& rng) {
    numvec p(r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        p[i] = r.lower[i] + rng.next_double() * (r.upper[i] - r.lower[i]);
    return p;
}

/// Two states, one three-way observation row and one binary row: exercises
/// the auxiliary-chain decomposition with three parameters in total.
std::pair<Pomdp, Fsc> three_obs_instance() {
    Pomdp m;
    m.states = {"x", "y"};
    m.actions = {"a"};
    m.observations = {"o0", "o1", "o2"};
    m.discount = 0.8;
    m.allocate();
    m.t(0, 0, 0) = 0.6;
    m.t(0, 0, 1) = 0.4;
    m.t(0, 1, 1) = 1.0;
    m.z(0, 0, 0) = 0.5;
    m.z(0, 0, 1) = 0.3;
    m.z(0, 0, 2) = 0.2;
    m.z(0, 1, 0) = 0.7;
    m.z(0, 1, 1) = 0.3;
    m.r(0, 0) = 1.0;
    m.r(1, 0) = -0.5;
    m.initial_belief = {1.0, 0.0};
    Fsc pi;
    pi.nodes = {"n0", "n1", "n2"};
    pi.action_of = {0, 0, 0};
    pi.memory_update = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
    pi.initial_node = 0;
    return {m, pi};
}

}  // namespace

TEST_CASE("binary rows stay untouched by the simple-chain conversion") {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    ParametricMc pmc = build_pmc(m, pi);
    SimplePmc simple = to_simple(pmc);
    // Toy rover transitions are identity under measurement, so every
    // parametric row is already a (p, 1-p) pair: no auxiliary states.
    CHECK(simple.num_states() == pmc.num_chain_states());
    CHECK(simple.dparams.size() == pmc.params.size());
}

TEST_CASE("three-way categorical rows gain one auxiliary state per row") {
    auto [m, pi] = three_obs_instance();
    ParametricMc pmc = build_pmc(m, pi);
    REQUIRE(pmc.params.size() == 3);  // two for the k=3 row, one for the k=2 row
    SimplePmc simple = to_simple(pmc);
    std::size_t aux = 0;
    for (char f : simple.is_aux) aux += f == 1;
    // One k=3 cluster per (x, n) product row: three nodes => three aux states,
    // plus cluster roots for the split T row.
    CHECK(aux > 0);
    CHECK(simple.dparams.size() > pmc.params.size());  // rescaled second branches

    // Constant rows stay constant.
    auto [m1, pi1] = builtin(BenchmarkId::part_qc_policy1);
    ParametricMc qc = build_pmc(m1, pi1);
    SimplePmc qs = to_simple(qc);
    for (std::size_t q = 0; q < qc.num_chain_states(); ++q) {
        bool all_const = true;
        for (const auto& [to, poly] : qc.rows[q])
            if (!poly.is_constant()) all_const = false;
        if (!all_const) continue;
        for (const auto& b : qs.rows[q]) CHECK(b.kind == SimplePmc::Kind::constant);
    }
}

TEST_CASE("the simple chain preserves values at random parameter points") {
    auto [m, pi] = three_obs_instance();
    ParametricMc pmc = build_pmc(m, pi);
    SimplePmc simple = to_simple(pmc);
    Region region = region_for(m, 0.15, 0.01);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        numvec p = random_point_in(region, rng);
        double original = pmc_value_at(pmc, p, Horizon::finite(6));
        double converted = relax_min(simple, point_region(p), Horizon::finite(6));
        CHECK(converted == doctest::Approx(original).epsilon(1e-12));

        double original_inf = pmc_value_at(pmc, p, Horizon::infinite(), 1e-11);
        double converted_inf = relax_min(simple, point_region(p), Horizon::infinite(), 1e-11);
        CHECK(converted_inf == doctest::Approx(original_inf).epsilon(1e-9));
    }
}

TEST_CASE("relaxation facts") {
    SUBCASE("degenerate regions evaluate exactly") {
        auto [m, pi] = builtin(BenchmarkId::tiger);
        ParametricMc pmc = build_pmc(m, pi);
        SimplePmc simple = to_simple(pmc);
        numvec nominal = pmc.nominal_point();
        double direct = pmc_value_at(pmc, nominal, Horizon::infinite(), 1e-10);
        double relaxed = relax_min(simple, point_region(nominal), Horizon::infinite(), 1e-10);
        CHECK(relaxed == doctest::Approx(direct).epsilon(1e-7));
    }
    SUBCASE("single-occurrence parameters make the relaxation exact") {
        // One state, two actions; the only parametric row is used by a single
        // controller node, so there is no coupling to drop.
        Pomdp m;
        m.states = {"x"};
        m.actions = {"a", "b"};
        m.observations = {"o0", "o1"};
        m.discount = 0.9;
        m.allocate();
        m.t(0, 0, 0) = 1.0;
        m.t(1, 0, 0) = 1.0;
        m.z(0, 0, 0) = 0.6;
        m.z(0, 0, 1) = 0.4;
        m.z(1, 0, 0) = 1.0;
        m.r(0, 0) = 0.0;
        m.r(0, 1) = 1.0;
        m.initial_belief = {1.0};
        Fsc pi;
        pi.nodes = {"start", "good", "stay"};
        pi.action_of = {0, 1, 0};
        // start branches on the observation; the other nodes absorb.
        pi.memory_update = {{1, 2}, {1, 1}, {2, 2}};
        pi.initial_node = 0;
        ParametricMc pmc = build_pmc(m, pi);
        Region region = region_for(m, 0.25, 0.01);
        double relaxed = relax_min(to_simple(pmc), region, Horizon::infinite(), 1e-10);
        PlaResult exact = pla_min(pmc, region, Horizon::infinite(), 1e-9);
        CHECK(relaxed == doctest::Approx(exact.min_value).epsilon(1e-7));
    }
    SUBCASE("toy-rover relaxation lower-bounds the sticky minimum") {
        auto [m, pi] = builtin(BenchmarkId::toy_rover);
        m.discount = 1.0;
        ParametricMc pmc = build_pmc(m, pi);
        double relaxed =
            relax_min(to_simple(pmc), region_for(m, 0.1, 0.01), Horizon::finite(5));
        CHECK(relaxed <= 0.8521 + 1e-9);
    }
}

TEST_CASE("relaxation is conservative against in-region sampling") {
    auto [m, pi] = three_obs_instance();
    ParametricMc pmc = build_pmc(m, pi);
    SimplePmc simple = to_simple(pmc);
    Region region = region_for(m, 0.12, 0.01);
    double lb = relax_min(simple, region, Horizon::finite(8));
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        numvec p = random_point_in(region, rng);
        CHECK(lb <= pmc_value_at(pmc, p, Horizon::finite(8)) + 1e-10);
    }
}

TEST_CASE("instantiate validates reachable rows") {
    auto [m, pi] = three_obs_instance();
    ParametricMc pmc = build_pmc(m, pi);
    SUBCASE("vertex instantiations are valid distributions") {
        Region region = region_for(m, 0.1, 0.01);
        ProductMc at_vertex = instantiate(pmc, region.lower);
        for (std::size_t q = 1; q < at_vertex.rows.size(); ++q) {
            if (!pmc.reachable[q]) continue;
            double sum = 0.0;
            for (const auto& e : at_vertex.rows[q]) sum += e.p;
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("points breaking the simplex are rejected") {
        numvec bad = pmc.nominal_point();
        bad[0] = 0.9;
        bad[1] = 0.9;  // k=3 group sums above one: dependent branch negative
        CHECK_THROWS_AS(instantiate(pmc, bad), InvalidDistribution);
    }
}

TEST_CASE("pla_min worked cases") {
    SUBCASE("zero-parameter chains get a single exact evaluation") {
        Pomdp m;
        m.states = {"x", "y"};
        m.actions = {"a"};
        m.observations = {"o"};
        m.discount = 0.5;
        m.allocate();
        m.t(0, 0, 1) = 1.0;
        m.t(0, 1, 1) = 1.0;
        m.z(0, 0, 0) = 1.0;
        m.z(0, 1, 0) = 1.0;
        m.r(0, 0) = 1.0;
        m.initial_belief = {1.0, 0.0};
        Fsc pi;
        pi.nodes = {"n"};
        pi.action_of = {0};
        pi.memory_update = {{0}};
        ParametricMc pmc = build_pmc(m, pi);
        CHECK(pmc.params.empty());
        PlaResult r = pla_min(pmc, region_for(m, 0.5, 0.0), Horizon::infinite(), 1e-9);
        CHECK(r.regions_explored == 1);
        CHECK(r.min_value == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(r.lower_bound == r.min_value);
    }
    SUBCASE("toy rover sticky minimum and argmin") {
        auto [m, pi] = builtin(BenchmarkId::toy_rover);
        m.discount = 1.0;
        ParametricMc pmc = build_pmc(m, pi);
        PlaResult r = pla_min(pmc, region_for(m, 0.1, 0.01), Horizon::finite(5), 1e-7);
        CHECK(r.conclusive);
        CHECK(r.min_value == doctest::Approx(0.8521).epsilon(1.2e-3));
        // All eight measurement parameters sit at the damaging bound.
        for (std::size_t i = 0; i < pmc.params.size(); ++i) {
            double expected = pmc.params[i].nominal == 0.99 ? 0.89 : 0.11;
            CHECK(r.argmin[i] == doctest::Approx(expected).epsilon(1e-6));
        }
    }
    SUBCASE("single-parameter instances match a dense grid scan") {
        Pomdp m;
        m.states = {"x", "y", "z"};
        m.actions = {"a"};
        m.observations = {"o0", "o1"};
        m.discount = 0.9;
        m.allocate();
        m.t(0, 0, 1) = 0.5;
        m.t(0, 0, 2) = 0.5;
        m.t(0, 1, 1) = 1.0;
        m.t(0, 2, 2) = 1.0;
        m.z(0, 1, 0) = 0.7;
        m.z(0, 1, 1) = 0.3;
        m.z(0, 0, 0) = 1.0;
        m.z(0, 2, 0) = 1.0;
        m.r(1, 0) = 1.0;
        m.r(2, 0) = -1.0;
        m.initial_belief = {1.0, 0.0, 0.0};
        Fsc pi;
        pi.nodes = {"n0", "n1"};
        pi.action_of = {0, 0};
        pi.memory_update = {{0, 1}, {1, 0}};
        pi.initial_node = 0;
        ParametricMc pmc = build_pmc(m, pi);
        REQUIRE(pmc.params.size() == 1);
        Region region = region_for(m, 0.25, 0.01);
        PlaResult r = pla_min(pmc, region, Horizon::finite(9), 1e-7);
        double grid_best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 10000; ++i) {
            numvec p = {region.lower[0] +
                        (region.upper[0] - region.lower[0]) * i / 10000.0};
            grid_best = std::min(grid_best, pmc_value_at(pmc, p, Horizon::finite(9)));
        }
        CHECK(r.min_value == doctest::Approx(grid_best).epsilon(1e-6));
        CHECK(r.min_value <= grid_best + 1e-7);
    }
}

TEST_CASE("pla_min soundness against dense grid scans") {
    SUBCASE("two relevant parameters at 100 points per axis") {
        auto [m, pi] = builtin(BenchmarkId::tiger);
        ParametricMc pmc = build_pmc(m, pi);
        Region region = region_for(m, 0.04, 0.0);
        PlaResult r = pla_min(pmc, region, Horizon::infinite(), 1e-7);
        CHECK(r.conclusive);
        // Only the two listening rows are relevant; scan them densely.
        std::vector<std::size_t> dims;
        for (std::size_t i = 0; i < pmc.params.size(); ++i)
            if (pmc.params[i].action == m.action_index("listen")) dims.push_back(i);
        REQUIRE(dims.size() == 2);
        numvec p = pmc.nominal_point();
        double grid_best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 100; ++i) {
            for (int j = 0; j < 100; ++j) {
                p[dims[0]] = region.lower[dims[0]] +
                             (region.upper[dims[0]] - region.lower[dims[0]]) * i / 99.0;
                p[dims[1]] = region.lower[dims[1]] +
                             (region.upper[dims[1]] - region.lower[dims[1]]) * j / 99.0;
                grid_best = std::min(grid_best, pmc_value_at(pmc, p, Horizon::infinite(), 1e-9));
            }
        }
        CHECK(r.min_value <= grid_best + 1e-6);
        CHECK(grid_best >= r.lower_bound - 1e-6);
    }
    SUBCASE("three parameters including a rescaled chain") {
        auto [m, pi] = three_obs_instance();
        ParametricMc pmc = build_pmc(m, pi);
        Region region = region_for(m, 0.1, 0.01);
        PlaResult r = pla_min(pmc, region, Horizon::finite(6), 1e-7);
        CHECK(r.conclusive);
        double grid_best = std::numeric_limits<double>::infinity();
        const int G = 40;
        numvec p(3);
        for (int i = 0; i <= G; ++i)
            for (int j = 0; j <= G; ++j)
                for (int k = 0; k <= G; ++k) {
                    p[0] = region.lower[0] + (region.upper[0] - region.lower[0]) * i / G;
                    p[1] = region.lower[1] + (region.upper[1] - region.lower[1]) * j / G;
                    p[2] = region.lower[2] + (region.upper[2] - region.lower[2]) * k / G;
                    grid_best = std::min(grid_best, pmc_value_at(pmc, p, Horizon::finite(6)));
                }
        CHECK(r.min_value <= grid_best + 1e-7);
        CHECK(r.min_value >= grid_best - 1e-6);
    }
}

TEST_CASE("sticky minima dominate non-sticky minima on the benchmarks") {
    for (const std::string& name : benchmark_names()) {
        CAPTURE(name);
        auto [m, pi] = builtin(benchmark_from_name(name));
        Horizon h = m.horizon;
        if (!h.is_infinite) m.discount = 1.0;
        Horizon ch = h.is_infinite ? h : Horizon::finite(2 * h.steps);
        ParametricMc pmc = build_pmc(m, pi);
        TwoStepMc ts = build_tsmc(m, pi);
        for (double delta : {0.05, 0.3}) {
            double sticky =
                pla_min(pmc, region_for(m, delta, 0.01), h, 1e-6).min_value;
            double non_sticky =
                ipe_min(repair_unreachable(build_tsimc(ts, delta, 0.01)), ch, 1e-8)
                    .value_at_initial();
            CHECK(sticky >= non_sticky - 1e-6);
        }
    }
}

TEST_CASE("exhausted region budgets are flagged, never silently signed") {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    m.discount = 1.0;
    ParametricMc pmc = build_pmc(m, pi);
    PlaOptions opts;
    opts.max_regions = 2;
    PlaResult r = pla_min(pmc, region_for(m, 0.3, 0.01), Horizon::finite(5), 1e-9, opts);
    CHECK_FALSE(r.conclusive);
    CHECK(r.min_value >= r.lower_bound);
}
