#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "obsrobust/chains.hpp"
#include "obsrobust/robust_eval.hpp"

namespace obsrobust {

/**
 * Parametric chain in which every transition is a constant, a parameter, or
 * one minus a parameter. Categorical rows of the source chain become chains
 * of binary branches through auxiliary states whose branch probabilities are
 * rescaled parameters r_i = p_i / (1 - p_1 - ... - p_{i-1}).
 *
 * Auxiliary states carry zero reward and discount 1 (their hops happen
 * inside one original step), so values and horizons count original steps
 * only. Instantiating at any parameter point reproduces the source chain's
 * value at q_I exactly.
 */
struct SimplePmc {
    enum class Kind : std::uint8_t { constant, param, complement };
    struct Branch {
        std::size_t to;
        Kind kind;
        double c;            // used by Kind::constant
        std::size_t dparam;  // used by param/complement
    };
    /// r = point[param] / (1 - sum over prefix of point[.]); prefix empty for
    /// original (unrescaled) parameters.
    struct DerivedParam {
        std::size_t param;
        std::vector<std::size_t> prefix;

        double value_at(const numvec& point) const;
        /// Tight interval of r over a box region, clamped to [0, 1].
        std::pair<double, double> interval_over(const Region& r) const;
    };

    std::vector<std::vector<Branch>> rows;
    std::vector<char> is_aux;
    numvec reward;  // zero on auxiliary states
    double discount = 1.0;
    std::size_t n_original = 0;
    std::vector<std::size_t> aux_back_map;  // aux index - n_original -> original state
    std::vector<DerivedParam> dparams;
    // States reachable from q_I; sweeps iterate only these. Auxiliary states
    // are listed in descending index order so chains resolve within a sweep.
    std::vector<std::size_t> active_original;
    std::vector<std::size_t> active_aux;

    std::size_t num_states() const { return rows.size(); }
};

/// Binary-chain decomposition of a parametric chain built by build_pmc.
/// Rows that are already simple (all constant, or a single p / 1-p pair) are
/// left untouched. Throws UnsupportedPolynomial for other shapes.
SimplePmc to_simple(const ParametricMc& c);

/**
 * Lower bound on min over the region of the chain value at q_I: every state's
 * parameter occurrence picks its interval endpoint independently, dropping
 * the coupling between states, which reduces to pessimistic value iteration
 * on the induced interval chain. Exact when each parameter occurs in a
 * single row, and exact on degenerate (point) regions.
 */
double relax_min(const SimplePmc& c, const Region& r, Horizon horizon, double eps = 1e-9);

/// Substitutes a parameter point into every polynomial. Throws
/// InvalidDistribution if a row reachable from q_I does not form a
/// distribution at that point.
ProductMc instantiate(const ParametricMc& c, const numvec& point);

/// Value of the parametric chain at q_I for one parameter point, without
/// materializing the instantiated chain. Infinite-horizon values of small
/// chains are obtained by a direct linear solve, otherwise by iteration.
double pmc_value_at(const ParametricMc& c, const numvec& point, Horizon horizon,
                    double eps = 1e-9);

struct PlaOptions {
    std::size_t max_regions = 200000;
    std::size_t vertex_cap = std::size_t{1} << 12;
    std::uint64_t sample_seed = 0x9e3779b9u;  // used only above the vertex cap
};

struct PlaResult {
    double min_value = 0.0;    // best concrete (upper) value found
    numvec argmin;             // parameter point attaining min_value
    double lower_bound = 0.0;  // proven lower bound on the true minimum
    bool conclusive = true;    // false when the region budget ran out
    std::size_t regions_explored = 0;
};

/**
 * Branch-and-bound minimization of the chain value over a parameter box to
 * within eps_pla: concrete candidates come from instantiating region vertices
 * and centers (multi-affine values attain region extrema at vertices),
 * relax_min prunes regions, and surviving regions split at the midpoint of
 * their widest parameter. Parameters that do not appear in any row reachable
 * from q_I are pinned to the region center and never split.
 */
PlaResult pla_min(const ParametricMc& c, const Region& r0, Horizon horizon, double eps_pla = 1e-7,
                  const PlaOptions& options = {});

struct PlaFeasibility {
    bool satisfied = false;    // true iff min over the region >= threshold
    double best_value = 0.0;   // best concrete value seen
    double lower_bound = 0.0;
    bool conclusive = true;
    std::size_t regions_explored = 0;
};

/// Decides whether the region minimum stays at or above `threshold`, running
/// the same branch-and-bound but stopping as soon as either a concrete point
/// falls below the threshold or the proven lower bound reaches it. Agrees
/// with the sign of (pla_min >= threshold) up to eps_pla.
PlaFeasibility pla_check_min_above(const ParametricMc& c, const Region& r0, Horizon horizon,
                                   double threshold, double eps_pla = 1e-7,
                                   const PlaOptions& options = {});

}  // namespace obsrobust
