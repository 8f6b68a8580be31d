#include "obsrobust/validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "obsrobust/parallel.hpp"
#include "obsrobust/rng.hpp"
#include "obsrobust/robust_eval.hpp"

namespace obsrobust {

namespace {

/// Greedy bound assignment in the given successor order; every order yields a
/// vertex of the row's transportation polytope.
void vertex_by_order(const std::vector<IntervalTransition>& row,
                     const std::vector<std::size_t>& order, numvec& probs) {
    probs.resize(row.size());
    double budget = 1.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        probs[i] = row[i].lo;
        budget -= row[i].lo;
    }
    if (budget < -1e-9) throw InfeasibleRow("interval row lower bounds exceed 1");
    for (std::size_t idx : order) {
        if (budget <= 0.0) break;
        double add = std::min(row[idx].hi - row[idx].lo, budget);
        probs[idx] += add;
        budget -= add;
    }
    if (budget > 1e-9) throw InfeasibleRow("interval row upper bounds fall short of 1");
}

}  // namespace

TwoStepMc ExtremaSamplerNs::sample(std::size_t index) const {
    const TwoStepIntervalMc& c = *chain_;
    TwoStepMc out;
    out.n_states = c.n_states;
    out.n_nodes = c.n_nodes;
    out.two_phase = true;
    out.discount = c.discount;
    out.initial_node = c.initial_node;
    out.reward = c.reward;
    out.rows.resize(c.rows.size());
    Rng rng = Rng::substream(seed_, index);
    numvec probs;
    for (std::size_t q = 0; q < c.rows.size(); ++q) {
        const auto& row = c.rows[q];
        out.rows[q].reserve(row.size());
        if (c.interval_row[q] && !row.empty()) {
            std::vector<std::size_t> order = rng.next_permutation_of(row.size());
            vertex_by_order(row, order, probs);
            for (std::size_t i = 0; i < row.size(); ++i)
                out.rows[q].push_back({row[i].to, probs[i]});
        } else {
            for (const IntervalTransition& e : row) out.rows[q].push_back({e.to, e.nominal});
        }
    }
    return out;
}

ExtremaSamplerSticky::ExtremaSamplerSticky(const Pomdp& m, double delta, double eps_p,
                                           std::uint64_t seed)
    : model_(&m), delta_(delta), eps_p_(eps_p), seed_(seed) {
    for (std::size_t a = 0; a < m.num_actions(); ++a)
        for (std::size_t s2 = 0; s2 < m.num_states(); ++s2)
            for (std::size_t o = 0; o < m.num_observations(); ++o)
                if (m.z(a, s2, o) > 0.0 && eps_p > m.z(a, s2, o) + kSimplexTol)
                    throw EmptyInterval("graph-preservation floor exceeds a nominal probability");
}

Pomdp ExtremaSamplerSticky::sample(std::size_t index) const {
    const Pomdp& m = *model_;
    Pomdp out = m;
    Rng rng = Rng::substream(seed_, index);
    numvec probs;
    std::vector<IntervalTransition> row;
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
        for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
            row.clear();
            for (std::size_t o = 0; o < m.num_observations(); ++o) {
                double z = m.z(a, s2, o);
                if (z > 0.0)
                    row.push_back({o, z, std::max(z - delta_, eps_p_), std::min(z + delta_, 1.0)});
            }
            if (row.size() < 2) continue;
            std::vector<std::size_t> order = rng.next_permutation_of(row.size());
            vertex_by_order(row, order, probs);
            for (std::size_t i = 0; i < row.size(); ++i) out.z(a, s2, row[i].to) = probs[i];
        }
    }
    return out;
}

double empirical_eta(double V0, double V) {
    if (V0 == 0.0) throw DivisionByZero("relative degradation is undefined at V0 = 0");
    return (V0 - V) / std::abs(V0);
}

double brute_force_min(const TwoStepIntervalMc& c, long chain_horizon, std::size_t max_rows,
                       std::size_t max_vertex_product) {
    const std::size_t Q = c.num_chain_states();
    std::vector<std::size_t> interval_states;
    std::vector<std::vector<numvec>> vertices;  // per interval state
    double vertex_product = 1.0;
    for (std::size_t q = 1; q < Q; ++q) {
        if (!c.interval_row[q] || c.rows[q].empty()) continue;
        bool degenerate = true;
        for (const IntervalTransition& e : c.rows[q])
            if (e.hi - e.lo > 1e-15) degenerate = false;
        if (degenerate) continue;
        interval_states.push_back(q);
        if (interval_states.size() > max_rows)
            throw TooLarge("too many interval rows for exhaustive enumeration");
        // All order-greedy vertices of the row's polytope, deduplicated.
        const auto& row = c.rows[q];
        std::vector<std::size_t> order(row.size());
        for (std::size_t i = 0; i < row.size(); ++i) order[i] = i;
        std::vector<numvec> verts;
        numvec probs;
        do {
            vertex_by_order(row, order, probs);
            verts.push_back(probs);
        } while (std::next_permutation(order.begin(), order.end()));
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        vertex_product *= static_cast<double>(verts.size());
        if (vertex_product > static_cast<double>(max_vertex_product))
            throw TooLarge("vertex count product exceeds the enumeration budget");
        vertices.push_back(std::move(verts));
    }

    numvec value(Q, 0.0), next(Q, 0.0);
    for (long step = 0; step < chain_horizon; ++step) {
        std::size_t iv = 0;
        for (std::size_t q = 1; q < Q; ++q) {
            double acc;
            if (iv < interval_states.size() && interval_states[iv] == q) {
                acc = std::numeric_limits<double>::infinity();
                for (const numvec& vert : vertices[iv]) {
                    double dot = 0.0;
                    for (std::size_t i = 0; i < vert.size(); ++i)
                        dot += vert[i] * value[c.rows[q][i].to];
                    acc = std::min(acc, dot);
                }
                ++iv;
            } else {
                acc = 0.0;
                for (const IntervalTransition& e : c.rows[q]) acc += e.nominal * value[e.to];
            }
            next[q] = c.reward[q] + c.discount * acc;
        }
        value.swap(next);
    }
    double init = 0.0;
    for (const IntervalTransition& e : c.rows[0]) init += e.nominal * value[e.to];
    return init;
}

McStats monte_carlo(const Pomdp& m, const Fsc& pi, std::size_t n_rollouts, long horizon,
                    std::uint64_t seed) {
    const std::size_t S = m.num_states(), N = pi.num_nodes(), O = m.num_observations();
    McStats stats;
    stats.rollouts = n_rollouts;
    stats.seed = seed;
    stats.n_states = S;
    stats.n_nodes = N;
    numvec returns(n_rollouts, 0.0);
    std::vector<std::atomic<std::uint32_t>> visits(S * N);
    for (auto& v : visits) v.store(0, std::memory_order_relaxed);

    parallel_for(n_rollouts, [&](std::size_t i) {
        Rng rng = Rng::substream(seed, i);
        std::vector<char> seen(S * N, 0);
        std::size_t s = rng.next_categorical(m.initial_belief);
        std::size_t n = pi.initial_node;
        double ret = 0.0, disc = 1.0;
        numvec weights(std::max(S, O));
        for (long t = 0; t < horizon; ++t) {
            seen[s * N + n] = 1;
            std::size_t a = pi.action_of[n];
            ret += disc * m.r(s, a);
            disc *= m.discount;
            weights.assign(S, 0.0);
            for (std::size_t s2 = 0; s2 < S; ++s2) weights[s2] = m.t(a, s, s2);
            std::size_t s2 = rng.next_categorical(weights);
            weights.assign(O, 0.0);
            for (std::size_t o = 0; o < O; ++o) weights[o] = m.z(a, s2, o);
            std::size_t o = rng.next_categorical(weights);
            std::size_t n2 = pi.next_node(n, o);
            if (n2 == kNoNode) break;
            s = s2;
            n = n2;
        }
        returns[i] = ret;
        for (std::size_t q = 0; q < S * N; ++q)
            if (seen[q]) visits[q].fetch_add(1, std::memory_order_relaxed);
    });

    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(n_rollouts);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    if (n_rollouts > 1) var /= static_cast<double>(n_rollouts - 1);
    stats.mean = mean;
    stats.std_error = std::sqrt(var / static_cast<double>(n_rollouts));
    stats.visit_freq.resize(S * N);
    for (std::size_t q = 0; q < S * N; ++q)
        stats.visit_freq[q] =
            static_cast<double>(visits[q].load()) / static_cast<double>(n_rollouts);
    return stats;
}

McStats simulate_witness(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                         std::size_t n_rollouts, long chain_steps, std::uint64_t seed,
                         const std::optional<numvec>& belief_override) {
    const std::size_t S = c.n_states, N = c.n_nodes;
    McStats stats;
    stats.rollouts = n_rollouts;
    stats.seed = seed;
    stats.n_states = S;
    stats.n_nodes = N;
    numvec returns(n_rollouts, 0.0);
    std::vector<std::atomic<std::uint32_t>> visits(S * N);
    for (auto& v : visits) v.store(0, std::memory_order_relaxed);

    parallel_for(n_rollouts, [&](std::size_t i) {
        Rng rng = Rng::substream(seed, i);
        std::vector<char> seen(S * N, 0);
        std::size_t q;
        if (belief_override) {
            std::size_t s = rng.next_categorical(*belief_override);
            q = c.ts_index(s, c.initial_node, 0);
        } else {
            numvec weights;
            std::vector<std::size_t> targets;
            for (const IntervalTransition& e : c.rows[0]) {
                weights.push_back(e.nominal);
                targets.push_back(e.to);
            }
            q = targets[rng.next_categorical(weights)];
        }
        double ret = 0.0, disc = 1.0;
        numvec weights;
        for (long t = 0; t < chain_steps; ++t) {
            std::size_t s, n, phase;
            c.labels(q, s, n, phase);
            if (phase == 0) seen[s * N + n] = 1;  // phase 1 repeats the node with the next state
            ret += disc * c.reward[q];
            disc *= c.discount;
            const auto& row = c.rows[q];
            if (row.empty()) continue;  // dead end on an unrepaired chain
            weights.clear();
            if (c.interval_row[q] && !w.empty()) {
                const std::vector<KernelRow>& kernel =
                    w.at_remaining(static_cast<std::size_t>(chain_steps - t));
                auto it = std::lower_bound(kernel.begin(), kernel.end(), q,
                                           [](const KernelRow& kr, std::size_t state) {
                                               return kr.state < state;
                                           });
                if (it == kernel.end() || it->state != q)
                    throw IndexMismatch("witness kernel is missing an interval row");
                for (double p : it->probs) weights.push_back(p);
            } else {
                for (const IntervalTransition& e : row) weights.push_back(e.nominal);
            }
            q = row[rng.next_categorical(weights)].to;
        }
        returns[i] = ret;
        for (std::size_t idx = 0; idx < S * N; ++idx)
            if (seen[idx]) visits[idx].fetch_add(1, std::memory_order_relaxed);
    });

    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(n_rollouts);
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    if (n_rollouts > 1) var /= static_cast<double>(n_rollouts - 1);
    stats.mean = mean;
    stats.std_error = std::sqrt(var / static_cast<double>(n_rollouts));
    stats.visit_freq.resize(S * N);
    for (std::size_t idx = 0; idx < S * N; ++idx)
        stats.visit_freq[idx] =
            static_cast<double>(visits[idx].load()) / static_cast<double>(n_rollouts);
    return stats;
}

std::vector<RobustnessResult> sweep(const RobustnessQuery& q,
                                    const std::vector<double>& thresholds) {
    if (thresholds.empty()) throw InvalidQuery("threshold list is empty");
    std::vector<RobustnessResult> results(thresholds.size());
    std::vector<std::exception_ptr> errors(thresholds.size());
    parallel_for(thresholds.size(), [&](std::size_t i) {
        try {
            RobustnessQuery sub = q;
            if (q.eta)
                sub.eta = thresholds[i];
            else
                sub.delta_threshold = thresholds[i];
            results[i] = ris(sub);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

ValidationReport run_validation(const RobustnessQuery& q, std::size_t n_samples,
                                std::uint64_t seed) {
    RobustnessResult result = ris(q);
    const Pomdp m = q.effective_model();
    const double eps_p = q.resolved_eps_p();
    const Horizon chain_h =
        q.horizon.is_infinite ? q.horizon : Horizon::finite(2 * q.horizon.steps);
    const double v0 = result.nominal_value;

    ValidationReport report;
    report.target_eta = q.eta ? *q.eta : result.threshold / std::abs(v0);
    report.delta_used = result.delta;
    report.samples = n_samples;
    report.seed = seed;

    const TwoStepMc nominal_chain = build_tsmc(m, q.policy);
    TwoStepIntervalMc interval =
        repair_unreachable(build_tsimc(nominal_chain, result.delta, eps_p));

    if (q.variant == Variant::non_sticky) {
        report.eta_witness =
            empirical_eta(v0, witness_value(interval, *result.kernel_witness, chain_h, q.eps_inner));
        ExtremaSamplerNs sampler(interval, seed);
        numvec values(n_samples);
        parallel_for(n_samples, [&](std::size_t i) {
            values[i] = vi_point(sampler.sample(i), chain_h, q.eps_inner).values[0];
        });
        double worst = *std::min_element(values.begin(), values.end());
        report.eta_sampled_ns = empirical_eta(v0, worst);
    } else {
        ParametricMc pmc = build_pmc(m, q.policy);
        report.eta_witness = empirical_eta(
            v0, pmc_value_at(pmc, result.parameter_witness->values, q.horizon, q.eps_inner));
    }

    {
        ExtremaSamplerSticky sampler(m, result.delta, eps_p, seed ^ 0x5bd1e995u);
        numvec values(n_samples);
        parallel_for(n_samples, [&](std::size_t i) {
            TwoStepMc chain = build_tsmc(sampler.sample(i), q.policy);
            values[i] = vi_point(chain, chain_h, q.eps_inner).values[0];
        });
        double worst = *std::min_element(values.begin(), values.end());
        report.eta_sampled_s = empirical_eta(v0, worst);
    }
    return report;
}

}  // namespace obsrobust
