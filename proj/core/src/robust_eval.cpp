#include "obsrobust/robust_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace obsrobust {

namespace {

double initial_value_from(const std::vector<std::vector<Transition>>& rows, const numvec& v) {
    double acc = 0.0;
    for (const Transition& e : rows[0]) acc += e.p * v[e.to];
    return acc;
}

/// Greedy order-statistic minimization for one interval row. `order` is a
/// scratch index buffer sized to the row.
double min_row(const std::vector<IntervalTransition>& row, const numvec& values, numvec& probs,
               std::vector<std::size_t>& order) {
    const std::size_t k = row.size();
    double sum_lo = 0.0, sum_hi = 0.0;
    for (const IntervalTransition& e : row) {
        sum_lo += e.lo;
        sum_hi += e.hi;
    }
    if (sum_lo > 1.0 + 1e-9 || sum_hi < 1.0 - 1e-9)
        throw InfeasibleRow("interval row admits no distribution (lower sum " +
                            std::to_string(sum_lo) + ", upper sum " + std::to_string(sum_hi) +
                            ")");
    order.resize(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        double vi = values[row[i].to], vj = values[row[j].to];
        if (vi != vj) return vi < vj;
        return row[i].to < row[j].to;
    });
    probs.resize(k);
    for (std::size_t i = 0; i < k; ++i) probs[i] = row[i].lo;
    double budget = 1.0 - sum_lo;
    for (std::size_t idx : order) {
        if (budget <= 0.0) break;
        double add = std::min(row[idx].hi - row[idx].lo, budget);
        probs[idx] += add;
        budget -= add;
    }
    double value = 0.0;
    for (std::size_t i = 0; i < k; ++i) value += probs[i] * values[row[i].to];
    return value;
}

}  // namespace

std::pair<numvec, double> robust_backup_min(const numvec& row_lower, const numvec& row_upper,
                                            const numvec& succ_values) {
    if (row_lower.size() != row_upper.size() || row_lower.size() != succ_values.size())
        throw IndexMismatch("interval row dimensions disagree");
    std::vector<IntervalTransition> row(row_lower.size());
    numvec values(succ_values.size());
    for (std::size_t i = 0; i < row_lower.size(); ++i) {
        row[i] = {i, 0.0, row_lower[i], row_upper[i]};
        values[i] = succ_values[i];
    }
    numvec probs;
    std::vector<std::size_t> order;
    double v = min_row(row, values, probs, order);
    return {probs, v};
}

ValueTable vi_point(const Mc& c, Horizon chain_horizon, double eps) {
    const std::size_t Q = c.num_chain_states();
    const double gamma = c.discount;
    if (chain_horizon.is_infinite && gamma >= 1.0)
        throw NonContractive("infinite horizon requires discount < 1");

    numvec value(Q, 0.0), next(Q, 0.0);
    ValueTable out;
    auto sweep = [&]() {
        double resid = 0.0;
        for (std::size_t q = 1; q < Q; ++q) {
            double acc = 0.0;
            for (const Transition& e : c.rows[q]) acc += e.p * value[e.to];
            double v = c.reward[q] + gamma * acc;
            next[q] = v;
            resid = std::max(resid, std::abs(v - value[q]));
        }
        value.swap(next);
        return resid;
    };
    if (!chain_horizon.is_infinite) {
        for (long i = 0; i < chain_horizon.steps; ++i) out.residual = sweep();
        out.sweeps = static_cast<std::size_t>(chain_horizon.steps);
    } else {
        const double stop = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                        : std::numeric_limits<double>::infinity();
        double resid;
        do {
            resid = sweep();
            ++out.sweeps;
        } while (resid > stop);
        out.residual = resid;
        out.converged = true;
    }
    value[0] = initial_value_from(c.rows, value);
    out.values = std::move(value);
    return out;
}

IpeResult ipe_min(const TwoStepIntervalMc& c, Horizon chain_horizon, double eps_ipe,
                  WitnessMode mode) {
    const std::size_t Q = c.num_chain_states();
    const double gamma = c.discount;
    if (chain_horizon.is_infinite && gamma >= 1.0)
        throw NonContractive("infinite horizon requires discount < 1");

    std::vector<std::size_t> interval_states;
    for (std::size_t q = 1; q < Q; ++q)
        if (c.interval_row[q] && !c.rows[q].empty()) interval_states.push_back(q);

    numvec value(Q, 0.0), next(Q, 0.0);
    numvec probs;
    std::vector<std::size_t> order;
    IpeResult out;
    const bool record_per_step = mode == WitnessMode::per_step && !chain_horizon.is_infinite;
    const bool record_stationary = mode != WitnessMode::none && !record_per_step;

    std::vector<KernelRow> sweep_kernel;
    auto sweep = [&](bool record) {
        double resid = 0.0;
        if (record) sweep_kernel.clear();
        for (std::size_t q = 1; q < Q; ++q) {
            double acc;
            if (c.interval_row[q] && !c.rows[q].empty()) {
                acc = min_row(c.rows[q], value, probs, order);
                if (record) sweep_kernel.push_back({q, probs});
            } else {
                acc = 0.0;
                for (const IntervalTransition& e : c.rows[q]) acc += e.nominal * value[e.to];
            }
            double v = c.reward[q] + gamma * acc;
            next[q] = v;
            resid = std::max(resid, std::abs(v - value[q]));
        }
        value.swap(next);
        return resid;
    };

    if (!chain_horizon.is_infinite) {
        for (long k = 1; k <= chain_horizon.steps; ++k) {
            out.table.residual = sweep(record_per_step || (record_stationary && k == chain_horizon.steps));
            if (record_per_step) out.witness.kernels.push_back(sweep_kernel);
        }
        if (record_stationary && chain_horizon.steps > 0) {
            out.witness.stationary = true;
            out.witness.kernels.push_back(sweep_kernel);
        }
        out.table.sweeps = static_cast<std::size_t>(chain_horizon.steps);
    } else {
        const double stop = gamma > 0.0 ? eps_ipe * (1.0 - gamma) / gamma
                                        : std::numeric_limits<double>::infinity();
        double resid;
        do {
            resid = sweep(false);
            ++out.table.sweeps;
        } while (resid > stop);
        out.table.residual = resid;
        out.table.converged = true;
        if (mode != WitnessMode::none) {
            // One more sweep at the fixed point to extract the stationary kernel.
            sweep(true);
            ++out.table.sweeps;
            out.witness.stationary = true;
            out.witness.kernels.push_back(sweep_kernel);
        }
    }
    double init = 0.0;
    for (const IntervalTransition& e : c.rows[0]) init += e.nominal * value[e.to];
    value[0] = init;
    out.table.values = std::move(value);
    out.witness.value_at_initial = init;
    return out;
}

TwoStepMc apply_witness(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                        std::size_t remaining) {
    TwoStepMc out;
    out.n_states = c.n_states;
    out.n_nodes = c.n_nodes;
    out.two_phase = true;
    out.discount = c.discount;
    out.initial_node = c.initial_node;
    out.reward = c.reward;
    out.rows.resize(c.rows.size());
    for (std::size_t q = 0; q < c.rows.size(); ++q) {
        out.rows[q].reserve(c.rows[q].size());
        for (const IntervalTransition& e : c.rows[q]) out.rows[q].push_back({e.to, e.nominal});
    }
    if (!w.empty()) {
        const std::vector<KernelRow>& kernel = w.at_remaining(remaining);
        for (const KernelRow& kr : kernel)
            for (std::size_t i = 0; i < kr.probs.size(); ++i) out.rows[kr.state][i].p = kr.probs[i];
    }
    return out;
}

double witness_value(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                     Horizon chain_horizon, double eps) {
    if (w.stationary || chain_horizon.is_infinite) {
        TwoStepMc fixed = apply_witness(c, w);
        return vi_point(fixed, chain_horizon, eps).values[0];
    }
    // Non-stationary backward induction with the per-sweep kernels.
    const std::size_t Q = c.num_chain_states();
    numvec value(Q, 0.0), next(Q, 0.0);
    for (long k = 1; k <= chain_horizon.steps; ++k) {
        const std::vector<KernelRow>& kernel = w.at_remaining(static_cast<std::size_t>(k));
        std::size_t ki = 0;
        for (std::size_t q = 1; q < Q; ++q) {
            double acc = 0.0;
            if (c.interval_row[q] && !c.rows[q].empty()) {
                while (ki < kernel.size() && kernel[ki].state < q) ++ki;
                if (ki >= kernel.size() || kernel[ki].state != q)
                    throw IndexMismatch("witness kernel is missing an interval row");
                const numvec& p = kernel[ki].probs;
                for (std::size_t i = 0; i < c.rows[q].size(); ++i)
                    acc += p[i] * value[c.rows[q][i].to];
            } else {
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

}  // namespace obsrobust
