#pragma once

#include <cstddef>
#include <vector>

#include "obsrobust/chains.hpp"

namespace obsrobust {

struct ValueTable {
    numvec values;            // per chain state; entry 0 is the initial value
    bool converged = false;   // true for infinite-horizon runs that met the stopping rule
    std::size_t sweeps = 0;
    double residual = 0.0;
};

/// One minimizing distribution for an interval row, aligned with the row's
/// transition entries.
struct KernelRow {
    std::size_t state;
    numvec probs;
};

/**
 * Worst-case transition kernel attaining an interval chain's minimum value.
 * Infinite-horizon minimizers are stationary (kernels.size() == 1). Finite
 * horizons store one kernel per backup sweep: kernels[k-1] is the choice made
 * when k chain steps remain, so a simulator at step t of H total uses
 * kernels[H - t - 1].
 */
struct WorstCaseWitness {
    bool stationary = false;
    std::vector<std::vector<KernelRow>> kernels;
    double value_at_initial = 0.0;

    bool empty() const { return kernels.empty(); }
    const std::vector<KernelRow>& at_remaining(std::size_t remaining) const {
        return stationary ? kernels.front() : kernels.at(remaining - 1);
    }
};

/**
 * Plain value iteration on a point chain. `chain_horizon` counts chain steps:
 * pass 2d when evaluating a two-step chain to horizon d. Finite horizons run
 * exact backward induction; infinite horizons iterate Jacobi sweeps until the
 * residual is at most eps*(1-gamma)/gamma. The value at the initial state is
 * the belief-weighted average of the successor values, not a discounted
 * backup.
 */
ValueTable vi_point(const Mc& c, Horizon chain_horizon, double eps = 1e-7);

/**
 * Exact minimum of sum_i p_i v_i over {lo <= p <= hi, sum p = 1}: successors
 * are sorted by value (ties by ascending state index) and upper bounds are
 * assigned greedily while the remaining mass still covers the other lower
 * bounds. Returns the minimizing row and its value.
 */
std::pair<numvec, double> robust_backup_min(const numvec& row_lower, const numvec& row_upper,
                                            const numvec& succ_values);

enum class WitnessMode { none, values_only = none, stationary, per_step };

struct IpeResult {
    ValueTable table;
    WorstCaseWitness witness;
    double value_at_initial() const { return table.values[0]; }
};

/**
 * Interval policy evaluation: worst-case (minimizing) value of a repaired
 * two-step interval chain. Finite horizons run exactly `chain_horizon.steps`
 * sweeps and can record the per-sweep minimizing kernels; infinite horizons
 * iterate to the eps-accurate fixed point and report the stationary kernel of
 * the final sweep.
 */
IpeResult ipe_min(const TwoStepIntervalMc& c, Horizon chain_horizon, double eps_ipe = 1e-7,
                  WitnessMode mode = WitnessMode::none);

/// Point chain obtained by fixing every interval row to the witness kernel.
/// Finite-horizon witnesses are non-stationary; `remaining` selects the kernel
/// (see WorstCaseWitness). For stationary witnesses any value works.
TwoStepMc apply_witness(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                        std::size_t remaining = 1);

/// Evaluates a witness with plain value iteration, applying per-step kernels
/// in backward order for finite horizons. Used to confirm that the witness
/// reproduces the ipe_min value.
double witness_value(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                     Horizon chain_horizon, double eps = 1e-7);

}  // namespace obsrobust
