#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "obsrobust/errors.hpp"

namespace obsrobust {

using numvec = std::vector<double>;

/// Tolerance for probability-simplex checks throughout the library.
inline constexpr double kSimplexTol = 1e-9;

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

/// Evaluation horizon: a fixed number of decision steps, or infinite.
struct Horizon {
    static Horizon infinite() { return Horizon{}; }
    static Horizon finite(long n) {
        Horizon h;
        h.is_infinite = false;
        h.steps = n;
        return h;
    }

    bool is_infinite = true;
    long steps = 0;

    bool operator==(const Horizon& o) const {
        return is_infinite == o.is_infinite && (is_infinite || steps == o.steps);
    }
};

/**
 * Finite POMDP with dense transition, observation and reward tensors.
 *
 * Layout: transition[a][s][s'], observation_fn[a][s'][o], reward[s][a].
 * All benchmark models here are small, so dense storage is fine; the induced
 * Markov chains use sparse rows.
 */
struct Pomdp {
    std::vector<std::string> states;
    std::vector<std::string> actions;
    std::vector<std::string> observations;

    numvec transition;       // |A| * |S| * |S|
    numvec observation_fn;   // |A| * |S| * |O|
    numvec reward;           // |S| * |A|
    double discount = 0.95;
    numvec initial_belief;   // |S|
    Horizon horizon = Horizon::infinite();

    std::size_t num_states() const { return states.size(); }
    std::size_t num_actions() const { return actions.size(); }
    std::size_t num_observations() const { return observations.size(); }

    double t(std::size_t a, std::size_t s, std::size_t s2) const {
        return transition[(a * num_states() + s) * num_states() + s2];
    }
    double& t(std::size_t a, std::size_t s, std::size_t s2) {
        return transition[(a * num_states() + s) * num_states() + s2];
    }
    double z(std::size_t a, std::size_t s2, std::size_t o) const {
        return observation_fn[(a * num_states() + s2) * num_observations() + o];
    }
    double& z(std::size_t a, std::size_t s2, std::size_t o) {
        return observation_fn[(a * num_states() + s2) * num_observations() + o];
    }
    double r(std::size_t s, std::size_t a) const { return reward[s * num_actions() + a]; }
    double& r(std::size_t s, std::size_t a) { return reward[s * num_actions() + a]; }

    /// Allocates zeroed tensors once the name lists are set.
    void allocate();

    std::size_t state_index(const std::string& name) const;
    std::size_t action_index(const std::string& name) const;
    std::size_t observation_index(const std::string& name) const;
};

/// Distribution over POMDP states.
struct Belief {
    numvec probs;
};

/**
 * Finite-state controller. `memory_update[n][o]` holds the successor node or
 * kNoNode where the update is undefined. The map is allowed to be partial:
 * designers only specify updates for observations that can actually be
 * received, and support-preserving perturbations never add new ones.
 */
struct Fsc {
    std::vector<std::string> nodes;
    std::size_t initial_node = 0;
    std::vector<std::size_t> action_of;
    std::vector<std::vector<std::size_t>> memory_update;

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t next_node(std::size_t n, std::size_t o) const { return memory_update[n][o]; }
    std::size_t node_index(const std::string& name) const;
};

struct Violation {
    std::string location;
    std::string message;
};

/// Diagnoses every simplex/range invariant violation; never throws.
std::vector<Violation> validate_model(const Pomdp& m);

/// Checks Fsc invariants against a model (total action map, valid indices).
std::vector<Violation> validate_fsc(const Pomdp& m, const Fsc& pi);

/// Bayes update of a belief after taking `a` and observing `o`.
/// Throws ImpossibleObservation when the normalizer is zero.
Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const Pomdp& m);

struct FscEvaluation {
    double initial_value = 0.0;
    numvec table;          // V[s * |N| + n]
    std::size_t sweeps = 0;
    double residual = 0.0;
};

/**
 * Exact policy evaluation of an FSC on a POMDP over the product state space
 * (s, n). Finite horizons run exact backward induction; infinite horizons
 * iterate Jacobi sweeps until the sup-norm residual is at most
 * eps * (1 - gamma) / gamma, which bounds the value error by eps.
 *
 * Querying an undefined memory update with positive observation probability
 * is a hard error on product states reachable from the initial belief;
 * unreachable product states simply drop the missing mass.
 */
FscEvaluation fsc_value(const Pomdp& m, const Fsc& pi, Horizon horizon, double eps = 1e-7);

/// Product states (s, n) reachable from the initial belief under pi,
/// as a |S|*|N| flag vector.
std::vector<char> reachable_product_states(const Pomdp& m, const Fsc& pi);

/// Renormalizes every T/Z row and the initial belief whose sum is within
/// `tol` of 1. Called exactly once at load time by the parsers and builtins.
void renormalize(Pomdp& m, double tol = kSimplexTol);

}  // namespace obsrobust
