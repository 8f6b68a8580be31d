#include "obsrobust/param_lifting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>

#include "obsrobust/rng.hpp"

namespace obsrobust {

double SimplePmc::DerivedParam::value_at(const numvec& point) const {
    double denom = 1.0;
    for (std::size_t id : prefix) denom -= point[id];
    if (denom <= 0.0) return 0.0;  // branch unreachable: preceding mass is exhausted
    return point[param] / denom;
}

std::pair<double, double> SimplePmc::DerivedParam::interval_over(const Region& r) const {
    double denom_hi = 1.0, denom_lo = 1.0;
    for (std::size_t id : prefix) {
        denom_hi -= r.lower[id];
        denom_lo -= r.upper[id];
    }
    double lo = denom_hi > 0.0 ? r.lower[param] / denom_hi : 0.0;
    double hi = denom_lo > 0.0 ? r.upper[param] / denom_lo : 1.0;
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, lo, 1.0);
    return {lo, hi};
}

namespace {

/// Matches rows that are already in simple form: all entries constant, or
/// exactly one (p, 1-p) pair and nothing else.
bool row_is_simple(const std::vector<std::pair<std::size_t, LinearPoly>>& row,
                   std::size_t* pair_param) {
    *pair_param = kNoNode;
    std::size_t direct = kNoNode, complement = kNoNode;
    for (const auto& [to, poly] : row) {
        if (poly.is_constant()) continue;
        if (poly.terms.size() != 1) return false;
        const auto& [id, coeff] = poly.terms.front();
        if (coeff == 1.0 && poly.constant == 0.0) {
            if (direct != kNoNode) return false;
            direct = id;
        } else if (coeff == -1.0 && poly.constant == 1.0) {
            if (complement != kNoNode) return false;
            complement = id;
        } else {
            return false;
        }
    }
    if (direct == kNoNode && complement == kNoNode) return true;  // constant row
    if (direct != complement) return false;
    if (row.size() != 2) return false;
    *pair_param = direct;
    return true;
}

}  // namespace

SimplePmc to_simple(const ParametricMc& c) {
    const std::size_t Q = c.num_chain_states();
    SimplePmc out;
    out.n_original = Q;
    out.discount = c.discount;
    out.reward = c.reward;
    out.rows.resize(Q);
    out.is_aux.assign(Q, 0);
    // Derived parameters 0..|P|-1 alias the original parameters.
    out.dparams.resize(c.params.size());
    for (std::size_t i = 0; i < c.params.size(); ++i) out.dparams[i] = {i, {}};

    std::size_t sink = kNoNode;  // absorbs mass whose controller edge is undefined
    auto get_sink = [&]() {
        if (sink == kNoNode) {
            sink = out.rows.size();
            out.rows.push_back({{sink, SimplePmc::Kind::constant, 1.0, kNoNode}});
            out.is_aux.push_back(0);
            out.reward.push_back(0.0);
            out.aux_back_map.push_back(kNoNode);
        }
        return sink;
    };
    auto new_aux = [&](std::size_t original) {
        std::size_t id = out.rows.size();
        out.rows.push_back({});
        out.is_aux.push_back(1);
        out.reward.push_back(0.0);
        out.aux_back_map.push_back(original);
        return id;
    };

    for (std::size_t q = 0; q < Q; ++q) {
        std::size_t pair_param;
        if (row_is_simple(c.rows[q], &pair_param)) {
            for (const auto& [to, poly] : c.rows[q]) {
                if (poly.is_constant()) {
                    if (poly.constant > 0.0)
                        out.rows[q].push_back(
                            {to, SimplePmc::Kind::constant, poly.constant, kNoNode});
                } else if (poly.terms.front().second == 1.0) {
                    out.rows[q].push_back({to, SimplePmc::Kind::param, 0.0, pair_param});
                } else {
                    out.rows[q].push_back({to, SimplePmc::Kind::complement, 0.0, pair_param});
                }
            }
            continue;
        }
        // Cluster decomposition: q branches among clusters with constant
        // weights and each categorical cluster becomes a binary chain.
        for (const PmcCluster& cl : c.clusters[q]) {
            if (cl.group == kNoNode) {
                const auto& br = cl.branches.front();
                std::size_t to = br.target == kNoNode ? get_sink() : br.target;
                out.rows[q].push_back({to, SimplePmc::Kind::constant, cl.weight, kNoNode});
                continue;
            }
            const PmcGroup& grp = c.groups[cl.group];
            const std::size_t k = grp.support.size();
            std::size_t head = q;
            bool head_is_row = true;  // the first hop still carries the cluster weight
            std::vector<std::size_t> prefix;
            for (std::size_t i = 0; i + 1 < k; ++i) {
                std::size_t dparam;
                if (i == 0) {
                    dparam = grp.first_param;  // r_1 = p_1, no rescaling
                } else {
                    dparam = out.dparams.size();
                    out.dparams.push_back({grp.first_param + i, prefix});
                }
                std::size_t taken =
                    cl.branches[i].target == kNoNode ? get_sink() : cl.branches[i].target;
                std::size_t rest;
                if (i + 2 == k) {
                    rest = cl.branches[i + 1].target == kNoNode ? get_sink()
                                                                : cl.branches[i + 1].target;
                } else {
                    rest = new_aux(q);
                }
                if (head_is_row && cl.weight != 1.0) {
                    // Route through an auxiliary root so the cluster weight
                    // stays a plain constant branch.
                    std::size_t root = new_aux(q);
                    out.rows[q].push_back({root, SimplePmc::Kind::constant, cl.weight, kNoNode});
                    head = root;
                    head_is_row = false;
                }
                auto& head_row = out.rows[head];
                head_row.push_back({taken, SimplePmc::Kind::param, 0.0, dparam});
                head_row.push_back({rest, SimplePmc::Kind::complement, 0.0, dparam});
                prefix.push_back(grp.first_param + i);
                head = rest;
                head_is_row = false;
            }
        }
    }
    for (std::size_t q = 1; q < Q; ++q)
        if (c.reachable.empty() || c.reachable[q]) out.active_original.push_back(q);
    for (std::size_t q = out.rows.size(); q-- > Q;) {
        std::size_t back = out.aux_back_map[q - Q];
        bool live = back == kNoNode /* sink */ || c.reachable.empty() || c.reachable[back] ||
                    back == 0;
        if (live) out.active_aux.push_back(q);
    }
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Decoupled relaxation with reusable workspace and warm starts.
// ---------------------------------------------------------------------------

/// Endpoint-preference flags per derived parameter, accumulated over sweeps.
constexpr std::uint8_t kWantsLo = 1;
constexpr std::uint8_t kWantsHi = 2;

struct RelaxWorkspace {
    numvec value;
    numvec next;
    numvec aux_value;
    numvec dlo, dhi;
    std::vector<std::uint8_t> dirs;
};

double relax_sweep(const SimplePmc& c, RelaxWorkspace& ws, bool record_dirs) {
    auto branch_value = [&](const SimplePmc::Branch& b) {
        return c.is_aux[b.to] ? ws.aux_value[b.to] : ws.value[b.to];
    };
    auto row_min = [&](const std::vector<SimplePmc::Branch>& row) {
        double acc = 0.0;
        std::size_t pair_first = kNoNode;
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto& b = row[i];
            if (b.kind == SimplePmc::Kind::constant)
                acc += b.c * branch_value(b);
            else if (pair_first == kNoNode)
                pair_first = i;
        }
        if (pair_first != kNoNode) {
            const auto& first = row[pair_first];
            double va = 0.0, vb = 0.0;
            for (std::size_t i = pair_first; i < row.size(); ++i) {
                const auto& b = row[i];
                if (b.kind == SimplePmc::Kind::param && b.dparam == first.dparam)
                    va += branch_value(b);
                else if (b.kind == SimplePmc::Kind::complement && b.dparam == first.dparam)
                    vb += branch_value(b);
            }
            double r = va < vb ? ws.dhi[first.dparam] : ws.dlo[first.dparam];
            if (record_dirs && va != vb)
                ws.dirs[first.dparam] |= va < vb ? kWantsHi : kWantsLo;
            acc += r * va + (1.0 - r) * vb;
        }
        return acc;
    };

    for (std::size_t q = c.num_states(); q-- > c.n_original;)
        ws.aux_value[q] = row_min(c.rows[q]);
    double resid = 0.0;
    for (std::size_t q = 1; q < c.n_original; ++q) {
        double v = c.reward[q] + c.discount * row_min(c.rows[q]);
        ws.next[q] = v;
        resid = std::max(resid, std::abs(v - ws.value[q]));
    }
    ws.value.swap(ws.next);
    return resid;
}

/**
 * `warm` seeds infinite-horizon iterations (ignored for finite horizons,
 * which run exact backward induction from zero); on return it holds the final
 * value vector for reuse by child regions. When `dirs` is given it receives
 * the endpoint preferences per derived parameter: for finite horizons
 * accumulated over every sweep, for infinite horizons taken at the fixed
 * point. A parameter whose occurrences all agree is realized exactly by the
 * relaxation, so a region with no disagreements is resolved, not split.
 */
double relax_min_impl(const SimplePmc& c, const Region& r, Horizon horizon, double eps,
                      RelaxWorkspace& ws, numvec* warm,
                      std::vector<std::uint8_t>* dirs = nullptr) {
    if (horizon.is_infinite && c.discount >= 1.0)
        throw NonContractive("infinite horizon requires discount < 1");
    ws.aux_value.assign(c.num_states(), 0.0);
    ws.next.assign(c.num_states(), 0.0);
    ws.dlo.resize(c.dparams.size());
    ws.dhi.resize(c.dparams.size());
    ws.dirs.assign(dirs ? c.dparams.size() : 0, 0);
    for (std::size_t i = 0; i < c.dparams.size(); ++i)
        std::tie(ws.dlo[i], ws.dhi[i]) = c.dparams[i].interval_over(r);

    if (!horizon.is_infinite) {
        ws.value.assign(c.num_states(), 0.0);
        for (long k = 0; k < horizon.steps; ++k) relax_sweep(c, ws, dirs != nullptr);
    } else {
        if (warm && warm->size() == c.num_states())
            ws.value = *warm;
        else
            ws.value.assign(c.num_states(), 0.0);
        const double gamma = c.discount;
        const double stop = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                        : std::numeric_limits<double>::infinity();
        while (relax_sweep(c, ws, false) > stop) {}
        if (dirs) relax_sweep(c, ws, true);  // preferences at the fixed point
    }
    if (warm) *warm = ws.value;
    if (dirs) *dirs = ws.dirs;
    double acc = 0.0;
    for (const auto& b : c.rows[0]) acc += b.c * ws.value[b.to];
    return acc;
}

// ---------------------------------------------------------------------------
// Point evaluation with reusable workspace.
// ---------------------------------------------------------------------------

struct PointEvalWorkspace {
    numvec value;
    numvec next;
    std::vector<double> dense;
    numvec rhs;
    std::vector<std::size_t> perm;
};

double pmc_value_at_impl(const ParametricMc& c, const numvec& point, Horizon horizon, double eps,
                         PointEvalWorkspace& ws) {
    const std::size_t Q = c.num_chain_states();
    const double gamma = c.discount;
    if (horizon.is_infinite && gamma >= 1.0)
        throw NonContractive("infinite horizon requires discount < 1");

    ws.value.assign(Q, 0.0);
    if (!horizon.is_infinite) {
        ws.next.assign(Q, 0.0);
        for (long k = 0; k < horizon.steps; ++k) {
            for (std::size_t q = 1; q < Q; ++q) {
                double acc = 0.0;
                for (const auto& [to, poly] : c.rows[q]) acc += poly.eval(point) * ws.value[to];
                ws.next[q] = c.reward[q] + gamma * acc;
            }
            ws.value.swap(ws.next);
        }
    } else if (Q <= 1025) {
        // Direct solve of (I - gamma P) v = r over the non-initial states.
        const std::size_t n = Q - 1;
        ws.dense.assign(n * n, 0.0);
        ws.rhs.resize(n);
        double* a = ws.dense.data();
        for (std::size_t q = 1; q < Q; ++q) {
            a[(q - 1) * n + (q - 1)] += 1.0;
            for (const auto& [to, poly] : c.rows[q])
                if (to > 0) a[(q - 1) * n + (to - 1)] -= gamma * poly.eval(point);
            ws.rhs[q - 1] = c.reward[q];
        }
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t best = col;
            double best_abs = std::abs(a[col * n + col]);
            for (std::size_t row = col + 1; row < n; ++row) {
                double v = std::abs(a[row * n + col]);
                if (v > best_abs) {
                    best_abs = v;
                    best = row;
                }
            }
            if (best_abs == 0.0) throw NumericError("singular linear system in value solve");
            if (best != col) {
                for (std::size_t j = col; j < n; ++j) std::swap(a[col * n + j], a[best * n + j]);
                std::swap(ws.rhs[col], ws.rhs[best]);
            }
            double d = a[col * n + col];
            for (std::size_t row = col + 1; row < n; ++row) {
                double f = a[row * n + col] / d;
                if (f == 0.0) continue;
                a[row * n + col] = 0.0;
                for (std::size_t j = col + 1; j < n; ++j) a[row * n + j] -= f * a[col * n + j];
                ws.rhs[row] -= f * ws.rhs[col];
            }
        }
        for (std::size_t row = n; row-- > 0;) {
            double acc = ws.rhs[row];
            for (std::size_t j = row + 1; j < n; ++j) acc -= a[row * n + j] * ws.value[1 + j];
            ws.value[1 + row] = acc / a[row * n + row];
        }
    } else {
        ws.next.assign(Q, 0.0);
        const double stop = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                        : std::numeric_limits<double>::infinity();
        double resid;
        do {
            resid = 0.0;
            for (std::size_t q = 1; q < Q; ++q) {
                double acc = 0.0;
                for (const auto& [to, poly] : c.rows[q]) acc += poly.eval(point) * ws.value[to];
                double v = c.reward[q] + gamma * acc;
                ws.next[q] = v;
                resid = std::max(resid, std::abs(v - ws.value[q]));
            }
            ws.value.swap(ws.next);
        } while (resid > stop);
    }
    double init = 0.0;
    for (const auto& [to, poly] : c.rows[0]) init += poly.eval(point) * ws.value[to];
    return init;
}

}  // namespace

double relax_min(const SimplePmc& c, const Region& r, Horizon horizon, double eps) {
    RelaxWorkspace ws;
    return relax_min_impl(c, r, horizon, eps, ws, nullptr);
}

double pmc_value_at(const ParametricMc& c, const numvec& point, Horizon horizon, double eps) {
    PointEvalWorkspace ws;
    return pmc_value_at_impl(c, point, horizon, eps, ws);
}

ProductMc instantiate(const ParametricMc& c, const numvec& point) {
    if (point.size() != c.params.size())
        throw IndexMismatch("parameter point has wrong dimension");
    ProductMc out;
    out.n_states = c.n_states;
    out.n_nodes = c.n_nodes;
    out.two_phase = false;
    out.discount = c.discount;
    out.initial_node = c.initial_node;
    out.reward = c.reward;
    out.rows.resize(c.num_chain_states());
    for (std::size_t q = 0; q < c.num_chain_states(); ++q) {
        double sum = 0.0;
        for (const auto& [to, poly] : c.rows[q]) {
            double p = poly.eval(point);
            if (c.reachable[q] && p < -1e-9)
                throw InvalidDistribution("negative transition probability at state " +
                                          std::to_string(q));
            p = std::clamp(p, 0.0, 1.0);
            if (p > 0.0) out.rows[q].push_back({to, p});
            sum += p;
        }
        if (q > 0 && c.reachable[q] && std::abs(sum - 1.0) > 1e-9)
            throw InvalidDistribution("instantiated row " + std::to_string(q) + " sums to " +
                                      std::to_string(sum));
    }
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Shared branch-and-bound engine.
// ---------------------------------------------------------------------------

struct QueuedRegion {
    double lower_bound;
    std::size_t order;
    Region region;
    numvec warm;
    std::vector<std::size_t> conflicted;  // searched dims with disagreeing preferences
};
struct RegionCompare {
    bool operator()(const QueuedRegion& a, const QueuedRegion& b) const {
        if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
        return a.order > b.order;
    }
};

struct BnbOutcome {
    double best = std::numeric_limits<double>::infinity();
    numvec best_point;
    double lower_bound = -std::numeric_limits<double>::infinity();
    bool conclusive = true;
    std::size_t regions = 0;
};

/**
 * Best-first refinement. Concrete candidates: the root region's vertices (up
 * to the cap, sampled beyond it) plus every region's center. When
 * `stop_threshold` is set the search also halts as soon as the answer to
 * "is the minimum below the threshold?" is decided either way.
 */
BnbOutcome branch_and_bound(const ParametricMc& c, const Region& r0, Horizon horizon,
                            double eps_pla, const PlaOptions& options,
                            std::optional<double> stop_threshold) {
    const double inner_eps = std::min(eps_pla * 0.1, 1e-9);

    std::vector<char> used(c.params.size(), 0);
    for (std::size_t q = 0; q < c.num_chain_states(); ++q) {
        if (!c.reachable[q]) continue;
        for (const auto& [to, poly] : c.rows[q])
            for (const auto& [id, coeff] : poly.terms)
                if (coeff != 0.0) used[id] = 1;
    }
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < c.params.size(); ++i)
        if (used[i] && r0.width(i) > 1e-15) dims.push_back(i);

    BnbOutcome out;
    PointEvalWorkspace point_ws;
    auto group_sums_valid = [&](const numvec& point) {
        for (const PmcGroup& g : c.groups) {
            double sum = 0.0;
            for (std::size_t i = 0; i < g.num_params(); ++i) sum += point[g.first_param + i];
            if (sum > 1.0 + 1e-12) return false;
        }
        return true;
    };
    auto try_point = [&](const numvec& point) {
        if (!group_sums_valid(point)) return;
        double v = pmc_value_at_impl(c, point, horizon, inner_eps, point_ws);
        if (v < out.best) {
            out.best = v;
            out.best_point = point;
        }
    };

    if (dims.empty()) {
        numvec point = r0.center();
        try_point(point);
        out.lower_bound = out.best;
        out.regions = 1;
        return out;
    }

    // Root candidates: center plus the vertex set over the searched dims.
    {
        numvec point = r0.center();
        try_point(point);
        if (dims.size() < 30 && (std::size_t{1} << dims.size()) <= options.vertex_cap) {
            std::size_t count = std::size_t{1} << dims.size();
            for (std::size_t mask = 0; mask < count; ++mask) {
                for (std::size_t j = 0; j < dims.size(); ++j)
                    point[dims[j]] = (mask >> j) & 1 ? r0.upper[dims[j]] : r0.lower[dims[j]];
                try_point(point);
            }
        } else {
            Rng sampler(options.sample_seed);
            for (std::size_t k = 0; k < options.vertex_cap; ++k) {
                for (std::size_t j = 0; j < dims.size(); ++j)
                    point[dims[j]] = sampler.next_u64() & 1 ? r0.upper[dims[j]] : r0.lower[dims[j]];
                try_point(point);
            }
        }
    }

    SimplePmc simple = to_simple(c);
    RelaxWorkspace relax_ws;
    std::priority_queue<QueuedRegion, std::vector<QueuedRegion>, RegionCompare> queue;
    std::size_t order = 0;
    const bool keep_warm = horizon.is_infinite;  // finite sweeps cannot be warm-started
    std::vector<std::uint8_t> dir_flags, original_dirs(c.params.size());
    numvec resolve_point;

    // Relax the region. When every parameter's endpoint preferences agree the
    // relaxation equals the value of a concrete point of the region, so the
    // region is resolved on the spot; otherwise it queues up for splitting on
    // a conflicted dimension.
    auto push_region = [&](Region r, numvec warm) {
        double lb = relax_min_impl(simple, r, horizon, inner_eps, relax_ws, &warm, &dir_flags);
        try_point(r.center());
        ++out.regions;
        std::fill(original_dirs.begin(), original_dirs.end(), 0);
        for (std::size_t dp = 0; dp < simple.dparams.size(); ++dp) {
            if (dir_flags[dp] == 0) continue;
            auto [dlo, dhi] = simple.dparams[dp].interval_over(r);
            if (dhi - dlo <= 1e-15) continue;  // degenerate choice, no constraint
            original_dirs[simple.dparams[dp].param] |= dir_flags[dp];
            for (std::size_t pre : simple.dparams[dp].prefix) original_dirs[pre] |= dir_flags[dp];
        }
        std::vector<std::size_t> conflicted;
        for (std::size_t d : dims)
            if (original_dirs[d] == (kWantsLo | kWantsHi) && r.width(d) > 1e-15)
                conflicted.push_back(d);
        if (conflicted.empty()) {
            // Realizable preferences: evaluate the implied point; the region
            // needs no further refinement.
            resolve_point = r.center();
            for (std::size_t i = 0; i < c.params.size(); ++i) {
                if (original_dirs[i] == kWantsLo) resolve_point[i] = r.lower[i];
                if (original_dirs[i] == kWantsHi) resolve_point[i] = r.upper[i];
            }
            try_point(resolve_point);
            return;
        }
        if (!keep_warm) warm.clear();
        queue.push({lb, order++, std::move(r), std::move(warm), std::move(conflicted)});
    };
    push_region(r0, {});

    auto threshold_decided = [&]() {
        if (!stop_threshold) return false;
        if (out.best < *stop_threshold) return true;  // witness below the threshold
        return queue.empty() || queue.top().lower_bound >= *stop_threshold;
    };

    while (!queue.empty()) {
        if (threshold_decided()) {
            out.lower_bound = queue.empty() ? out.best : queue.top().lower_bound;
            return out;
        }
        QueuedRegion top = queue.top();
        queue.pop();
        out.lower_bound = top.lower_bound;
        if (top.lower_bound >= out.best - eps_pla) return out;  // gap closed
        if (out.regions + 2 > options.max_regions) {
            out.conclusive = false;
            return out;
        }
        std::size_t widest = top.conflicted.front();
        for (std::size_t d : top.conflicted)
            if (top.region.width(d) > top.region.width(widest)) widest = d;
        double mid = 0.5 * (top.region.lower[widest] + top.region.upper[widest]);
        Region left = top.region, right = std::move(top.region);
        left.upper[widest] = mid;
        right.lower[widest] = mid;
        push_region(std::move(left), top.warm);
        push_region(std::move(right), std::move(top.warm));
    }
    out.lower_bound = out.best;
    return out;
}

}  // namespace

PlaResult pla_min(const ParametricMc& c, const Region& r0, Horizon horizon, double eps_pla,
                  const PlaOptions& options) {
    if (r0.size() != c.params.size()) throw IndexMismatch("region has wrong dimension");
    BnbOutcome b = branch_and_bound(c, r0, horizon, eps_pla, options, std::nullopt);
    PlaResult out;
    out.min_value = b.best;
    out.argmin = std::move(b.best_point);
    out.lower_bound = b.lower_bound;
    out.conclusive = b.conclusive;
    out.regions_explored = b.regions;
    return out;
}

PlaFeasibility pla_check_min_above(const ParametricMc& c, const Region& r0, Horizon horizon,
                                   double threshold, double eps_pla, const PlaOptions& options) {
    if (r0.size() != c.params.size()) throw IndexMismatch("region has wrong dimension");
    BnbOutcome b = branch_and_bound(c, r0, horizon, eps_pla, options, threshold);
    PlaFeasibility out;
    out.best_value = b.best;
    out.lower_bound = b.lower_bound;
    out.conclusive = b.conclusive;
    out.regions_explored = b.regions;
    out.satisfied = b.conclusive && b.best >= threshold;
    return out;
}

}  // namespace obsrobust
