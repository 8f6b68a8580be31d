#include "obsrobust/ris.hpp"

#include <cmath>
#include <map>
#include <memory>

namespace obsrobust {

std::string variant_name(Variant v) { return v == Variant::sticky ? "sticky" : "nonsticky"; }

Variant variant_from_name(const std::string& name) {
    if (name == "sticky") return Variant::sticky;
    if (name == "nonsticky" || name == "non-sticky") return Variant::non_sticky;
    throw InvalidQuery("unknown variant '" + name + "'");
}

double RobustnessQuery::resolved_eps_p() const {
    if (eps_p) return *eps_p;
    return variant == Variant::sticky ? 0.01 : 0.0;
}

Pomdp RobustnessQuery::effective_model() const {
    Pomdp m = model;
    if (discount_override)
        m.discount = *discount_override;
    else if (!horizon.is_infinite)
        m.discount = 1.0;
    m.horizon = horizon;
    return m;
}

void RobustnessQuery::validate() const {
    if (eta.has_value() == delta_threshold.has_value())
        throw InvalidQuery("exactly one of eta / delta_threshold must be set");
    if (eta && *eta < 0.0) throw InvalidQuery("eta must be nonnegative");
    if (delta_threshold && *delta_threshold < 0.0)
        throw InvalidQuery("delta threshold must be nonnegative");
    if (eps_mbs <= 0.0 || eps_inner <= 0.0) throw InvalidQuery("tolerances must be positive");
    double ep = resolved_eps_p();
    if (ep < 0.0 || ep >= 1.0) throw InvalidQuery("eps_p must lie in [0,1)");
    if (!horizon.is_infinite && horizon.steps < 0) throw InvalidQuery("negative horizon");
    Pomdp m = effective_model();
    if (horizon.is_infinite && m.discount >= 1.0)
        throw InvalidQuery("infinite horizon requires discount < 1");
}

namespace {

int sign_of(double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); }

/// Caches f per delta and appends every fresh evaluation to the trace.
std::function<double(double)> memoized(std::function<double(double)> f,
                                       std::vector<BisectionStep>* trace) {
    auto cache = std::make_shared<std::map<double, double>>();
    return [f = std::move(f), trace, cache](double delta) {
        auto it = cache->find(delta);
        if (it != cache->end()) return it->second;
        double v = f(delta);
        cache->emplace(delta, v);
        if (trace) trace->push_back({delta, v});
        return v;
    };
}

Horizon chain_horizon_for(const TwoStepMc&, Horizon h) {
    return h.is_infinite ? h : Horizon::finite(2 * h.steps);
}

}  // namespace

MbsOutcome mbs(const std::function<double(double)>& f, double a0, double b0, double eps_mbs) {
    if (eps_mbs <= 0.0) throw InvalidQuery("eps_mbs must be positive");
    double fa = f(a0);
    if (fa > 0.0)
        throw PreconditionViolated("feasibility must hold at the lower endpoint (f(a0) = " +
                                   std::to_string(fa) + ")");
    double fb = f(b0);
    if (sign_of(fa) == sign_of(fb)) return {b0, true};
    double a = a0, b = b0;
    while (b - a > eps_mbs) {
        double c = 0.5 * (a + b);
        double fc = f(c);
        if (fc == 0.0) {
            a = c;  // keep looking for the largest admissible radius
        } else if (sign_of(fc) == sign_of(fa)) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    return {a, false};
}

std::function<double(double)> feasibility_ns(const TwoStepMc& c_tz, double V0, double Delta,
                                             Horizon chain_horizon, double eps_ipe, double eps_p) {
    return [&c_tz, V0, Delta, chain_horizon, eps_ipe, eps_p](double delta) {
        TwoStepIntervalMc interval = repair_unreachable(build_tsimc(c_tz, delta, eps_p));
        IpeResult worst = ipe_min(interval, chain_horizon, eps_ipe, WitnessMode::none);
        return V0 - Delta - worst.value_at_initial();
    };
}

std::function<double(double)> feasibility_s(const ParametricMc& c_p, double V0, double Delta,
                                            Horizon horizon, double eps_pla, double eps_p,
                                            const PlaOptions& options) {
    return [&c_p, V0, Delta, horizon, eps_pla, eps_p, options](double delta) {
        Region region = region_for_params(c_p.params, delta, eps_p);
        PlaFeasibility worst =
            pla_check_min_above(c_p, region, horizon, V0 - Delta - eps_pla, eps_pla, options);
        if (!worst.conclusive)
            throw Inconclusive("parameter lifting exhausted its region budget at delta = " +
                               std::to_string(delta));
        return worst.satisfied ? -1.0 : 1.0;
    };
}

RobustnessResult ris_ns(const RobustnessQuery& q) {
    q.validate();
    if (q.variant != Variant::non_sticky) throw InvalidQuery("query variant is not non-sticky");
    const Pomdp m = q.effective_model();
    const double eps_p = q.resolved_eps_p();
    const TwoStepMc chain = build_tsmc(m, q.policy);
    const Horizon ch = chain_horizon_for(chain, q.horizon);

    // Nominal value through the same representation the search uses.
    TwoStepIntervalMc nominal = repair_unreachable(build_tsimc(chain, 0.0, eps_p));
    const double v0 = ipe_min(nominal, ch, q.eps_inner).value_at_initial();
    const double threshold = q.eta ? *q.eta * std::abs(v0) : *q.delta_threshold;

    RobustnessResult result;
    result.variant = Variant::non_sticky;
    result.nominal_value = v0;
    result.threshold = threshold;
    result.eta = q.eta;

    auto f = memoized(feasibility_ns(chain, v0, threshold, ch, q.eps_inner, eps_p),
                      &result.iterations);
    MbsOutcome outcome = mbs(f, 0.0, 1.0, q.eps_mbs);
    result.delta = outcome.delta;
    result.saturated = outcome.saturated;

    TwoStepIntervalMc at_delta = repair_unreachable(build_tsimc(chain, result.delta, eps_p));
    WitnessMode mode = ch.is_infinite ? WitnessMode::stationary : WitnessMode::per_step;
    IpeResult worst = ipe_min(at_delta, ch, q.eps_inner, mode);
    result.worst_case_value = worst.value_at_initial();
    result.kernel_witness = std::move(worst.witness);
    return result;
}

RobustnessResult ris_s(const RobustnessQuery& q) {
    q.validate();
    if (q.variant != Variant::sticky) throw InvalidQuery("query variant is not sticky");
    const Pomdp m = q.effective_model();
    const double eps_p = q.resolved_eps_p();
    const ParametricMc chain = build_pmc(m, q.policy);

    const double v0 = pmc_value_at(chain, chain.nominal_point(), q.horizon,
                                   std::min(q.eps_inner * 0.1, 1e-9));
    const double threshold = q.eta ? *q.eta * std::abs(v0) : *q.delta_threshold;

    RobustnessResult result;
    result.variant = Variant::sticky;
    result.nominal_value = v0;
    result.threshold = threshold;
    result.eta = q.eta;

    auto f = memoized(
        feasibility_s(chain, v0, threshold, q.horizon, q.eps_inner, eps_p, q.pla),
        &result.iterations);
    MbsOutcome outcome = mbs(f, 0.0, 1.0, q.eps_mbs);
    result.delta = outcome.delta;
    result.saturated = outcome.saturated;

    Region region = region_for_params(chain.params, result.delta, eps_p);
    PlaResult worst = pla_min(chain, region, q.horizon, q.eps_inner, q.pla);
    if (!worst.conclusive)
        throw Inconclusive("parameter lifting exhausted its region budget at the solution");
    result.worst_case_value = worst.min_value;
    ParameterWitness witness;
    witness.values = worst.argmin;
    witness.names.reserve(chain.params.size());
    for (const PmcParam& p : chain.params) witness.names.push_back(p.name);
    result.parameter_witness = std::move(witness);
    return result;
}

RobustnessResult ris(const RobustnessQuery& q) {
    return q.variant == Variant::sticky ? ris_s(q) : ris_ns(q);
}

}  // namespace obsrobust
