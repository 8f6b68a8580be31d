#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "obsrobust/pomdp.hpp"

namespace obsrobust {

struct Transition {
    std::size_t to;
    double p;
};

/**
 * Sparse Markov chain over product states. State 0 is the augmented initial
 * state q_I whose outgoing row encodes the initial belief; it carries no
 * reward and chain values at q_I are defined as the belief-weighted average
 * of the product-state values (no extra discount step).
 *
 * One-phase chains index (s, n) at 1 + s*|N| + n. Two-phase chains index
 * (s, n, i) at 1 + (s*|N| + n)*2 + i, where phase 0 takes the state
 * transition and phase 1 takes the observation-driven node transition.
 */
struct Mc {
    std::vector<std::vector<Transition>> rows;
    numvec reward;
    double discount = 1.0;
    std::size_t n_states = 0;
    std::size_t n_nodes = 0;
    bool two_phase = false;
    std::size_t initial_node = 0;

    std::size_t num_chain_states() const { return rows.size(); }
    std::size_t product_index(std::size_t s, std::size_t n) const { return 1 + s * n_nodes + n; }
    std::size_t ts_index(std::size_t s, std::size_t n, std::size_t i) const {
        return 1 + (s * n_nodes + n) * 2 + i;
    }
    /// Decomposes a non-initial chain state into (s, n, phase); phase is 0
    /// for one-phase chains.
    void labels(std::size_t q, std::size_t& s, std::size_t& n, std::size_t& phase) const;
    bool is_phase1(std::size_t q) const { return two_phase && q > 0 && (q - 1) % 2 == 1; }
};

struct ProductMc : Mc {};
struct TwoStepMc : Mc {};

struct IntervalTransition {
    std::size_t to;
    double nominal;
    double lo;
    double hi;
};

/**
 * Two-step Markov chain with interval bounds on the observation-phase rows.
 * State-transition rows and the initial row are point rows (lo == hi).
 */
struct TwoStepIntervalMc {
    std::vector<std::vector<IntervalTransition>> rows;
    std::vector<char> interval_row;  // 1 for perturbable (phase-1) rows
    numvec reward;
    double discount = 1.0;
    std::size_t n_states = 0;
    std::size_t n_nodes = 0;
    std::size_t initial_node = 0;
    double eps_p = 0.0;
    double delta = 0.0;

    std::size_t num_chain_states() const { return rows.size(); }
    std::size_t ts_index(std::size_t s, std::size_t n, std::size_t i) const {
        return 1 + (s * n_nodes + n) * 2 + i;
    }
    void labels(std::size_t q, std::size_t& s, std::size_t& n, std::size_t& phase) const;
};

/// Degree-1 polynomial c + sum_i a_i * p_i over parameter ids.
struct LinearPoly {
    double constant = 0.0;
    std::vector<std::pair<std::size_t, double>> terms;

    double eval(const numvec& point) const {
        double v = constant;
        for (const auto& [id, coeff] : terms) v += coeff * point[id];
        return v;
    }
    bool is_constant() const { return terms.empty(); }
    void add_term(std::size_t id, double coeff);
    void add(const LinearPoly& other, double scale);
};

/// One shared observation parameter: the probability of observation `obs`
/// after action `action` lands in state `next_state`.
struct PmcParam {
    std::size_t action;
    std::size_t next_state;
    std::size_t obs;
    double nominal;
    std::string name;
};

/// Parameter group for one (action, next-state) pair with support size k:
/// the first k-1 support observations get parameters and the highest-index
/// support observation carries the dependent probability 1 - sum.
struct PmcGroup {
    std::size_t action;
    std::size_t next_state;
    std::vector<std::size_t> support;      // ascending observation ids, size k
    std::size_t first_param;               // params [first_param, first_param+k-1)
    std::size_t num_params() const { return support.size() - 1; }
};

/// One (s -> s') slice of a parametric row: constant weight T(s'|s,a) times a
/// categorical over the support observations of (a, s').
struct PmcCluster {
    double weight;
    std::size_t group = kNoNode;           // kNoNode when the support is a singleton
    struct Branch {
        std::size_t obs;
        std::size_t target;                // chain state, kNoNode if the edge is undefined
        std::size_t param;                 // kNoNode for the dependent branch
    };
    std::vector<Branch> branches;
};

struct ParametricMc {
    std::vector<std::vector<std::pair<std::size_t, LinearPoly>>> rows;
    std::vector<std::vector<PmcCluster>> clusters;
    std::vector<PmcParam> params;
    std::vector<PmcGroup> groups;
    numvec reward;
    double discount = 1.0;
    std::size_t n_states = 0;
    std::size_t n_nodes = 0;
    std::size_t initial_node = 0;
    std::vector<char> reachable;           // per chain state, from q_I over nominal support

    std::size_t num_chain_states() const { return rows.size(); }
    std::size_t product_index(std::size_t s, std::size_t n) const { return 1 + s * n_nodes + n; }
    numvec nominal_point() const;
};

/// Per-parameter interval box.
struct Region {
    numvec lower;
    numvec upper;

    std::size_t size() const { return lower.size(); }
    double width(std::size_t i) const { return upper[i] - lower[i]; }
    numvec center() const;
    bool contains(const numvec& point, double tol = 1e-12) const;
};

/// Product chain of Def-3.3 shape: T((s',n')|(s,n)) = T(s'|s,a(n)) * Z(O(n,n')|a(n),s').
ProductMc build_product_mc(const Pomdp& m, const Fsc& pi);

/// Two-step chain separating state transitions (phase 0) from observation
/// transitions (phase 1); discount sqrt(gamma), horizons double.
TwoStepMc build_tsmc(const Pomdp& m, const Fsc& pi);

/// Equips the observation-phase rows with [max(p-delta, eps_p), min(p+delta, 1)]
/// bounds on their nominal support. Throws EmptyInterval when eps_p exceeds a
/// positive nominal probability.
TwoStepIntervalMc build_tsimc(const TwoStepMc& c, double delta, double eps_p);

/// Shared-parameter observation chain of Def-5.1 shape. Parameters exist for
/// every (a, s') pair with support size >= 2, whether or not the controller
/// visits it; parameter-lifting prunes unused ones.
ParametricMc build_pmc(const Pomdp& m, const Fsc& pi);

/// Enumerates the observation parameters of a model: (a, s') lexicographic,
/// support observations ascending, the highest-index one dependent.
std::pair<std::vector<PmcParam>, std::vector<PmcGroup>> enumerate_parameters(const Pomdp& m);

/// Box [max(Z-delta, eps_p), min(Z+delta, 1-eps_p)] over the parameters of m.
Region region_for(const Pomdp& m, double delta, double eps_p);

/// Same box construction over an explicit parameter table.
Region region_for_params(const std::vector<PmcParam>& params, double delta, double eps_p);

/**
 * Makes every row of the interval chain globally valid: unreachable states
 * with zero outbound mass get a [1,1] self-loop, unreachable rows with
 * nominal mass g in (0,1) are rescaled by 1/g (bounds included). Rows
 * reachable from q_I are never modified; if one is incomplete, the
 * controller's memory update was undefined on-path and this throws.
 */
TwoStepIntervalMc repair_unreachable(TwoStepIntervalMc c);

}  // namespace obsrobust
