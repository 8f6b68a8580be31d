#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "obsrobust/model_io.hpp"
#include "obsrobust/robust_eval.hpp"
#include "obsrobust/validation.hpp"
#include "test_support.hpp"

using namespace obsrobust;
using obsrobust::testing::random_fsc;
using obsrobust::testing::random_model;
using obsrobust::testing::random_tsimc;

TEST_CASE("vi_point basics") {
    SUBCASE("zero rewards give a zero table") {
        auto [m, pi] = builtin(BenchmarkId::tiger);
        TwoStepMc c = build_tsmc(m, pi);
        std::fill(c.reward.begin(), c.reward.end(), 0.0);
        ValueTable v = vi_point(c, Horizon::infinite(), 1e-9);
        for (double x : v.values) CHECK(x == 0.0);
    }
    SUBCASE("toy rover two-step chain at h=50 matches exact evaluation") {
        auto [m, pi] = builtin(BenchmarkId::toy_rover);
        double direct = fsc_value(m, pi, Horizon::finite(50)).initial_value;
        double chain = vi_point(build_tsmc(m, pi), Horizon::finite(100)).values[0];
        CHECK(chain == doctest::Approx(direct).epsilon(1e-6));
    }
    SUBCASE("absorbing state with unit reward is a geometric series") {
        TwoStepMc c;
        c.discount = 0.5;
        c.rows = {{{1, 1.0}}, {{1, 1.0}}};
        c.reward = {0.0, 1.0};
        c.n_states = 1;
        c.n_nodes = 1;
        ValueTable v = vi_point(c, Horizon::infinite(), 1e-10);
        CHECK(v.values[1] == doctest::Approx(2.0).epsilon(1e-8));
    }
    SUBCASE("gamma = 1 is rejected at infinite horizon") {
        auto [m, pi] = builtin(BenchmarkId::part_qc_policy1);
        CHECK_THROWS_AS(vi_point(build_tsmc(m, pi), Horizon::infinite()), NonContractive);
    }
}

TEST_CASE("robust_backup_min worked examples") {
    SUBCASE("unconstrained rows pile everything on the cheapest successor") {
        auto [row, value] = robust_backup_min({0.0, 0.0}, {1.0, 1.0}, {0.0, 10.0});
        CHECK(row[0] == 1.0);
        CHECK(row[1] == 0.0);
        CHECK(value == 0.0);
    }
    SUBCASE("greedy assignment within tight bounds") {
        auto [row, value] = robust_backup_min({0.4, 0.4}, {0.6, 0.6}, {0.0, 10.0});
        CHECK(row[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(row[1] == doctest::Approx(0.4).epsilon(1e-15));
        CHECK(value == doctest::Approx(4.0).epsilon(1e-15));
    }
    SUBCASE("degenerate bounds return the fixed row") {
        auto [row, value] = robust_backup_min({0.3, 0.7}, {0.3, 0.7}, {5.0, 1.0});
        CHECK(row[0] == 0.3);
        CHECK(row[1] == 0.7);
        CHECK(value == doctest::Approx(0.3 * 5.0 + 0.7).epsilon(1e-15));
    }
    SUBCASE("infeasible rows are rejected") {
        CHECK_THROWS_AS(robust_backup_min({0.7, 0.7}, {0.8, 0.8}, {0.0, 1.0}), InfeasibleRow);
        CHECK_THROWS_AS(robust_backup_min({0.1, 0.1}, {0.3, 0.3}, {0.0, 1.0}), InfeasibleRow);
    }
}

TEST_CASE("robust backup rows stay within bounds and on the simplex") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t k = 2 + rng.next_index(5);
        numvec lo(k), hi(k), values(k);
        double lo_sum = 0.0, hi_sum = 0.0;
        do {
            lo_sum = hi_sum = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                lo[i] = rng.next_double() / static_cast<double>(k);
                hi[i] = lo[i] + rng.next_double() * (1.0 - lo[i]);
                lo_sum += lo[i];
                hi_sum += hi[i];
            }
        } while (lo_sum > 1.0 || hi_sum < 1.0);
        for (std::size_t i = 0; i < k; ++i) values[i] = 10.0 * rng.next_double() - 5.0;
        auto [row, value] = robust_backup_min(lo, hi, values);
        double sum = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(row[i] >= lo[i] - 1e-12);
            CHECK(row[i] <= hi[i] + 1e-12);
            sum += row[i];
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(value <= std::inner_product(row.begin(), row.end(), values.begin(), 0.0) + 1e-12);
    }
}

TEST_CASE("ipe_min at zero radius equals plain value iteration exactly") {
    auto [m, pi] = builtin(BenchmarkId::tiger);
    TwoStepMc c = build_tsmc(m, pi);
    TwoStepIntervalMc imc = repair_unreachable(build_tsimc(c, 0.0, 0.0));
    IpeResult robust = ipe_min(imc, Horizon::infinite(), 1e-8);
    ValueTable plain = vi_point(c, Horizon::infinite(), 1e-8);
    CHECK(robust.value_at_initial() == plain.values[0]);
}

TEST_CASE("toy rover worst case at delta 0.1 reproduces the case study") {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    m.discount = 1.0;  // the finite-horizon studies are undiscounted
    TwoStepIntervalMc imc = repair_unreachable(build_tsimc(build_tsmc(m, pi), 0.1, 0.01));
    IpeResult worst = ipe_min(imc, Horizon::finite(10), 1e-7, WitnessMode::per_step);
    CHECK(worst.value_at_initial() == doctest::Approx(0.8466).epsilon(1.2e-3));

    // The minimizer leaves the angular-texture row at the thinks-small node
    // untouched: observing angular there already routes into the sand.
    std::size_t q = imc.ts_index(m.state_index("large-angular"), 2 /* texture-small */, 1);
    // Identify the entry that keeps the believed-small rover going through.
    auto [mm, pp] = builtin(BenchmarkId::toy_rover);
    std::size_t through_small = pp.node_index("through-small");
    std::size_t entry = kNoNode;
    for (std::size_t i = 0; i < imc.rows[q].size(); ++i)
        if (imc.rows[q][i].to == imc.ts_index(m.state_index("large-angular"), through_small, 0))
            entry = i;
    REQUIRE(entry != kNoNode);
    REQUIRE(imc.rows[q][entry].nominal == 0.99);
    for (std::size_t sweep = 2; sweep <= 10; ++sweep) {
        const auto& kernel = worst.witness.kernels[sweep - 1];
        auto it = std::find_if(kernel.begin(), kernel.end(),
                               [q](const KernelRow& kr) { return kr.state == q; });
        REQUIRE(it != kernel.end());
        CHECK(it->probs[entry] == doctest::Approx(0.99).epsilon(1e-12));
    }
}

TEST_CASE("texture-small node index matches the controller layout") {
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    CHECK(pi.node_index("texture-small") == 3 - 1);  // documented by the witness test above
}

TEST_CASE("small interval chains match exhaustive vertex enumeration") {
    Rng rng(17);
    for (int trial = 0; trial < 40; ++trial) {
        TwoStepIntervalMc imc = random_tsimc(rng, 2, 2, 2, 2, 0.3);
        long h = 2 * (1 + static_cast<long>(rng.next_index(3)));
        double oracle = brute_force_min(imc, h);
        double ipe = ipe_min(imc, Horizon::finite(h)).value_at_initial();
        CHECK(ipe == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("worst-case value is monotone non-increasing in delta") {
    Rng rng(19);
    auto check_monotone = [](const TwoStepMc& chain, Horizon h, const numvec& deltas,
                             double eps_p) {
        double prev = std::numeric_limits<double>::infinity();
        for (double d : deltas) {
            double v =
                ipe_min(repair_unreachable(build_tsimc(chain, d, eps_p)), h, 1e-9).value_at_initial();
            CHECK(v <= prev + 1e-9);
            prev = v;
        }
    };
    auto [m, pi] = builtin(BenchmarkId::tiger);
    check_monotone(build_tsmc(m, pi), Horizon::infinite(), {0.0, 0.01, 0.05, 0.1, 0.3, 1.0}, 0.0);
    for (int trial = 0; trial < 10; ++trial) {
        Pomdp rm = random_model(rng, 3, 2, 2);
        Fsc rf = random_fsc(rng, rm, 3);
        check_monotone(build_tsmc(rm, rf), Horizon::finite(8), {0.0, 0.05, 0.1, 0.2, 0.4}, 0.0);
    }
}

TEST_CASE("witnesses reproduce the robust value") {
    SUBCASE("stationary witness on the tiger model") {
        auto [m, pi] = builtin(BenchmarkId::tiger);
        TwoStepIntervalMc imc = repair_unreachable(build_tsimc(build_tsmc(m, pi), 0.05, 0.0));
        IpeResult worst = ipe_min(imc, Horizon::infinite(), 1e-8, WitnessMode::stationary);
        double replay = witness_value(imc, worst.witness, Horizon::infinite(), 1e-8);
        CHECK(replay == doctest::Approx(worst.value_at_initial()).epsilon(2e-8));
    }
    SUBCASE("per-step witness on random finite instances") {
        Rng rng(23);
        for (int trial = 0; trial < 20; ++trial) {
            TwoStepIntervalMc imc = random_tsimc(rng, 3, 2, 2, 3, 0.4);
            long h = 2 * (2 + static_cast<long>(rng.next_index(3)));
            IpeResult worst = ipe_min(imc, Horizon::finite(h), 1e-9, WitnessMode::per_step);
            double replay = witness_value(imc, worst.witness, Horizon::finite(h));
            CHECK(replay == doctest::Approx(worst.value_at_initial()).epsilon(1e-10));
        }
    }
}

TEST_CASE("sampled kernels never undercut the computed worst case") {
    Rng rng(29);
    auto [m, pi] = builtin(BenchmarkId::toy_rover);
    m.discount = 1.0;
    TwoStepIntervalMc imc = repair_unreachable(build_tsimc(build_tsmc(m, pi), 0.1, 0.01));
    double worst = ipe_min(imc, Horizon::finite(10), 1e-9).value_at_initial();
    ExtremaSamplerNs sampler(imc, 99);
    for (std::size_t i = 0; i < 300; ++i) {
        double v = vi_point(sampler.sample(i), Horizon::finite(10)).values[0];
        CHECK(v >= worst - 1e-9);
    }
}

namespace {

/// History-dependent worst case by direct enumeration: the adversary picks an
/// independent vertex of each observation ball per (state, history). Histories
/// are walked explicitly, so node-sharing is never assumed; agreement with
/// ipe_min on the node-based interval chain is the desk-scale equivalence
/// check between the history and node formulations. Observation mass is
/// grouped per successor node before the ball is applied, mirroring how the
/// interval chain defines its transitions.
double history_worst_case(const Pomdp& m, const Fsc& pi, double delta, double eps_p, long depth,
                          std::size_t s, std::size_t node) {
    const std::size_t a = pi.action_of[node];
    if (depth == 0) return 0.0;
    double acc = m.r(s, a);
    for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
        double tp = m.t(a, s, s2);
        if (tp <= 0.0) continue;
        // Merge observation mass per successor node, then ball each entry.
        std::vector<IntervalTransition> row;
        for (std::size_t o = 0; o < m.num_observations(); ++o) {
            double z = m.z(a, s2, o);
            if (z <= 0.0) continue;
            std::size_t n2 = pi.next_node(node, o);
            auto it = std::find_if(row.begin(), row.end(),
                                   [n2](const IntervalTransition& e) { return e.to == n2; });
            if (it == row.end())
                row.push_back({n2, z, 0.0, 0.0});
            else
                it->nominal += z;
        }
        for (IntervalTransition& e : row) {
            e.lo = std::max(e.nominal - delta, eps_p);
            e.hi = std::min(e.nominal + delta, 1.0);
        }
        numvec continuation(row.size());
        for (std::size_t i = 0; i < row.size(); ++i)
            continuation[i] = history_worst_case(m, pi, delta, eps_p, depth - 1, s2, row[i].to);
        std::vector<std::size_t> order(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end());
        double best = std::numeric_limits<double>::infinity();
        do {
            double budget = 1.0, dot = 0.0;
            numvec probs(row.size());
            for (std::size_t i = 0; i < row.size(); ++i) {
                probs[i] = row[i].lo;
                budget -= row[i].lo;
            }
            for (std::size_t idx : order) {
                double add = std::min(row[idx].hi - row[idx].lo, budget);
                probs[idx] += add;
                budget -= add;
                if (budget <= 0.0) break;
            }
            for (std::size_t i = 0; i < row.size(); ++i) dot += probs[i] * continuation[i];
            best = std::min(best, dot);
        } while (std::next_permutation(order.begin(), order.end()));
        acc += m.discount * tp * best;
    }
    return acc;
}

}  // namespace

TEST_CASE("history- and node-dependent worst cases agree at desk scale") {
    Rng rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        Pomdp m = random_model(rng, 2 + rng.next_index(2), 2, 2 + rng.next_index(2));
        Fsc pi = random_fsc(rng, m, 2 + rng.next_index(2));
        double delta = 0.3 * rng.next_double();
        long d = 1 + static_cast<long>(rng.next_index(3));

        double by_history = 0.0;
        for (std::size_t s = 0; s < m.num_states(); ++s)
            if (m.initial_belief[s] > 0.0)
                by_history += m.initial_belief[s] *
                              history_worst_case(m, pi, delta, 0.0, d, s, pi.initial_node);

        TwoStepIntervalMc imc = repair_unreachable(build_tsimc(build_tsmc(m, pi), delta, 0.0));
        double by_node = ipe_min(imc, Horizon::finite(2 * d)).value_at_initial();
        CHECK(by_node == doctest::Approx(by_history).epsilon(1e-9));
    }
}
