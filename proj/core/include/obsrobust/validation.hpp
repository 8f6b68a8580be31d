#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "obsrobust/model_io.hpp"
#include "obsrobust/ris.hpp"

namespace obsrobust {

/**
 * Streams random extremal point chains of a (repaired) interval chain: each
 * sample fixes every interval row to a random vertex of its transportation
 * polytope, obtained by feeding a random successor order to the greedy bound
 * assignment. sample(i) is a pure function of (seed, i).
 */
class ExtremaSamplerNs {
  public:
    ExtremaSamplerNs(const TwoStepIntervalMc& chain, std::uint64_t seed)
        : chain_(&chain), seed_(seed) {}

    TwoStepMc sample(std::size_t index) const;

  private:
    const TwoStepIntervalMc* chain_;
    std::uint64_t seed_;
};

/**
 * Streams random sticky perturbations of a model: every observation row with
 * support size >= 2 is replaced by a random vertex of its support-preserving
 * delta-ball polytope (eps_p floored).
 */
class ExtremaSamplerSticky {
  public:
    ExtremaSamplerSticky(const Pomdp& m, double delta, double eps_p, std::uint64_t seed);

    Pomdp sample(std::size_t index) const;

  private:
    const Pomdp* model_;
    double delta_;
    double eps_p_;
    std::uint64_t seed_;
};

/// Relative degradation (V0 - V) / |V0|. Throws DivisionByZero when V0 = 0.
double empirical_eta(double V0, double V);

/**
 * Exact worst-case value of a small interval chain at a short finite horizon
 * by exhaustive per-step vertex minimization: every interval row's polytope
 * vertices are enumerated outright, with no greedy shortcut, so this serves
 * as an independent oracle for ipe_min. Throws TooLarge when the instance
 * exceeds the row/vertex limits.
 */
double brute_force_min(const TwoStepIntervalMc& c, long chain_horizon, std::size_t max_rows = 6,
                       std::size_t max_vertex_product = 1000000);

struct McStats {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t rollouts = 0;
    std::uint64_t seed = 0;
    std::size_t n_states = 0;
    std::size_t n_nodes = 0;
    /// Fraction of rollouts that ever visit product state (s, n).
    std::vector<double> visit_freq;

    double freq(std::size_t s, std::size_t n) const { return visit_freq[s * n_nodes + n]; }
};

/// Simulates the POMDP under the controller; returns the mean discounted
/// return, its standard error, and per-(state, node) visit frequencies.
McStats monte_carlo(const Pomdp& m, const Fsc& pi, std::size_t n_rollouts, long horizon,
                    std::uint64_t seed);

/// Simulates a worst-case kernel directly as a Markov chain (per-step kernels
/// applied in the order the witness prescribes). `belief_override` restricts
/// the initial state distribution, e.g. to condition on a state class.
McStats simulate_witness(const TwoStepIntervalMc& c, const WorstCaseWitness& w,
                         std::size_t n_rollouts, long chain_steps, std::uint64_t seed,
                         const std::optional<numvec>& belief_override = std::nullopt);

/// Runs one robustness query per threshold (in parallel); thresholds are
/// interpreted per the query's threshold mode.
std::vector<RobustnessResult> sweep(const RobustnessQuery& q, const std::vector<double>& thresholds);

/**
 * The empirical validation protocol: solve the query, evaluate the witness's
 * degradation, then check it against the worst degradation over sampled
 * extremal kernels (non-sticky runs) and sampled sticky observation
 * functions, each evaluated with plain value iteration on its two-step chain.
 */
ValidationReport run_validation(const RobustnessQuery& q, std::size_t n_samples,
                                std::uint64_t seed);

}  // namespace obsrobust
