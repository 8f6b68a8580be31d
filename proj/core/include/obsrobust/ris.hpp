#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "obsrobust/param_lifting.hpp"
#include "obsrobust/robust_eval.hpp"

namespace obsrobust {

enum class Variant { sticky, non_sticky };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

/**
 * One robustness question: how far may the observation model deviate before
 * the policy's value drops by more than the threshold.
 *
 * The threshold is either absolute (delta_threshold, value units) or relative
 * (eta, fraction of |V0|); exactly one must be set. eps_p defaults to 0 for
 * the non-sticky variant and 0.01 for the sticky one.
 *
 * Finite-horizon analyses are undiscounted unless discount_override is set:
 * the benchmark studies all evaluate finite horizons with total (gamma = 1)
 * reward even when the model file carries a discount for its infinite-horizon
 * use. Infinite horizons use the model's discount.
 */
struct RobustnessQuery {
    Pomdp model;
    Fsc policy;
    Variant variant = Variant::non_sticky;
    std::optional<double> eta;
    std::optional<double> delta_threshold;
    Horizon horizon = Horizon::infinite();
    double eps_mbs = 1e-7;
    double eps_inner = 1e-7;
    std::optional<double> eps_p;
    std::optional<double> discount_override;
    PlaOptions pla;

    double resolved_eps_p() const;
    /// Model with the discount rule above applied.
    Pomdp effective_model() const;
    /// Throws InvalidQuery when the invariants do not hold.
    void validate() const;
};

struct BisectionStep {
    double delta;
    double f;
};

/// Sticky argmin: one value per parameter of the induced parametric chain.
struct ParameterWitness {
    std::vector<std::string> names;
    numvec values;
};

struct RobustnessResult {
    double delta = 0.0;
    double nominal_value = 0.0;
    double worst_case_value = 0.0;
    Variant variant = Variant::non_sticky;
    std::vector<BisectionStep> iterations;
    bool saturated = false;   // delta = 1 accepted without bisection
    double threshold = 0.0;   // the absolute degradation threshold used
    std::optional<double> eta;

    // Exactly one of the two witnesses is populated.
    std::optional<WorstCaseWitness> kernel_witness;
    std::optional<ParameterWitness> parameter_witness;
};

struct MbsOutcome {
    double delta;
    bool saturated;
};

/**
 * Modified bisection search for the largest delta with f(delta) <= 0 on
 * [a0, b0]. Requires f(a0) <= 0. When f has the same sign at both endpoints
 * the whole interval is admissible and b0 is returned immediately. A midpoint
 * with f = 0 advances the lower bound rather than terminating, so the
 * largest admissible radius is returned, not just any root.
 */
MbsOutcome mbs(const std::function<double(double)>& f, double a0, double b0, double eps_mbs);

/// f_TZ(delta) = V0 - Delta - worst-case value of the two-step interval chain
/// at radius delta; non-positive iff the robustness constraint holds.
std::function<double(double)> feasibility_ns(const TwoStepMc& c_tz, double V0, double Delta,
                                             Horizon chain_horizon, double eps_ipe, double eps_p);

/// Sign evaluator for the sticky variant: -1 when the parameter-lifting
/// minimum over the delta-region stays above V0 - Delta - eps_pla, +1
/// otherwise. Throws Inconclusive when region refinement runs out of budget.
std::function<double(double)> feasibility_s(const ParametricMc& c_p, double V0, double Delta,
                                            Horizon horizon, double eps_pla, double eps_p,
                                            const PlaOptions& options = {});

/// Robust interval search, non-sticky variant: bisection over the interval
/// chain's worst-case value.
RobustnessResult ris_ns(const RobustnessQuery& q);

/// Robust interval search, sticky variant: bisection over the parametric
/// chain's region minimum.
RobustnessResult ris_s(const RobustnessQuery& q);

/// Dispatches on q.variant.
RobustnessResult ris(const RobustnessQuery& q);

}  // namespace obsrobust
