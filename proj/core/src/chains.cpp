#include "obsrobust/chains.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace obsrobust {

void Mc::labels(std::size_t q, std::size_t& s, std::size_t& n, std::size_t& phase) const {
    std::size_t base = q - 1;
    if (two_phase) {
        phase = base % 2;
        base /= 2;
    } else {
        phase = 0;
    }
    n = base % n_nodes;
    s = base / n_nodes;
}

void TwoStepIntervalMc::labels(std::size_t q, std::size_t& s, std::size_t& n,
                               std::size_t& phase) const {
    std::size_t base = q - 1;
    phase = base % 2;
    base /= 2;
    n = base % n_nodes;
    s = base / n_nodes;
}

void LinearPoly::add_term(std::size_t id, double coeff) {
    for (auto& [tid, c] : terms) {
        if (tid == id) {
            c += coeff;
            return;
        }
    }
    terms.push_back({id, coeff});
}

void LinearPoly::add(const LinearPoly& other, double scale) {
    constant += scale * other.constant;
    for (const auto& [id, coeff] : other.terms) add_term(id, scale * coeff);
}

namespace {

void prune_zero_terms(LinearPoly& poly) {
    std::erase_if(poly.terms, [](const auto& t) { return t.second == 0.0; });
    std::sort(poly.terms.begin(), poly.terms.end());
}

std::vector<char> chain_reachable(const std::vector<std::vector<Transition>>& rows) {
    std::vector<char> reach(rows.size(), 0);
    std::deque<std::size_t> queue{0};
    reach[0] = 1;
    while (!queue.empty()) {
        std::size_t q = queue.front();
        queue.pop_front();
        for (const Transition& e : rows[q]) {
            if (e.p > 0.0 && !reach[e.to]) {
                reach[e.to] = 1;
                queue.push_back(e.to);
            }
        }
    }
    return reach;
}

void check_reachable_rows_complete(const std::vector<std::vector<Transition>>& rows,
                                   const std::vector<char>& reach, const char* what) {
    for (std::size_t q = 1; q < rows.size(); ++q) {
        if (!reach[q]) continue;
        double sum = 0.0;
        for (const Transition& e : rows[q]) sum += e.p;
        if (std::abs(sum - 1.0) > kSimplexTol)
            throw UndefinedMemoryUpdate(std::string(what) + ": reachable state " +
                                        std::to_string(q) + " has outgoing mass " +
                                        std::to_string(sum) +
                                        " (memory update undefined on a supported observation)");
    }
}

}  // namespace

ProductMc build_product_mc(const Pomdp& m, const Fsc& pi) {
    const std::size_t S = m.num_states(), N = pi.num_nodes(), O = m.num_observations();
    ProductMc c;
    c.n_states = S;
    c.n_nodes = N;
    c.two_phase = false;
    c.discount = m.discount;
    c.initial_node = pi.initial_node;
    c.rows.resize(1 + S * N);
    c.reward.assign(1 + S * N, 0.0);

    for (std::size_t s = 0; s < S; ++s)
        if (m.initial_belief[s] > 0.0)
            c.rows[0].push_back({c.product_index(s, pi.initial_node), m.initial_belief[s]});

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t a = pi.action_of[n];
            const std::size_t q = c.product_index(s, n);
            c.reward[q] = m.r(s, a);
            auto& row = c.rows[q];
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                double tp = m.t(a, s, s2);
                if (tp <= 0.0) continue;
                // Merge observation mass per successor node.
                for (std::size_t o = 0; o < O; ++o) {
                    double zp = m.z(a, s2, o);
                    if (zp <= 0.0) continue;
                    std::size_t n2 = pi.next_node(n, o);
                    if (n2 == kNoNode) continue;
                    std::size_t to = c.product_index(s2, n2);
                    auto it = std::find_if(row.begin(), row.end(),
                                           [to](const Transition& e) { return e.to == to; });
                    if (it == row.end())
                        row.push_back({to, tp * zp});
                    else
                        it->p += tp * zp;
                }
            }
        }
    }
    check_reachable_rows_complete(c.rows, chain_reachable(c.rows), "product chain");
    return c;
}

TwoStepMc build_tsmc(const Pomdp& m, const Fsc& pi) {
    const std::size_t S = m.num_states(), N = pi.num_nodes(), O = m.num_observations();
    TwoStepMc c;
    c.n_states = S;
    c.n_nodes = N;
    c.two_phase = true;
    c.discount = std::sqrt(m.discount);
    c.initial_node = pi.initial_node;
    c.rows.resize(1 + 2 * S * N);
    c.reward.assign(1 + 2 * S * N, 0.0);

    for (std::size_t s = 0; s < S; ++s)
        if (m.initial_belief[s] > 0.0)
            c.rows[0].push_back({c.ts_index(s, pi.initial_node, 0), m.initial_belief[s]});

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t a = pi.action_of[n];
            // Phase 0: state transition, node held fixed.
            const std::size_t q0 = c.ts_index(s, n, 0);
            c.reward[q0] = m.r(s, a);
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                double tp = m.t(a, s, s2);
                if (tp > 0.0) c.rows[q0].push_back({c.ts_index(s2, n, 1), tp});
            }
            // Phase 1: observation transition; s is now the landed state and the
            // observation row belongs to the action of the node that produced it.
            const std::size_t q1 = c.ts_index(s, n, 1);
            auto& row = c.rows[q1];
            for (std::size_t o = 0; o < O; ++o) {
                double zp = m.z(a, s, o);
                if (zp <= 0.0) continue;
                std::size_t n2 = pi.next_node(n, o);
                if (n2 == kNoNode) continue;
                std::size_t to = c.ts_index(s, n2, 0);
                auto it = std::find_if(row.begin(), row.end(),
                                       [to](const Transition& e) { return e.to == to; });
                if (it == row.end())
                    row.push_back({to, zp});
                else
                    it->p += zp;
            }
        }
    }
    check_reachable_rows_complete(c.rows, chain_reachable(c.rows), "two-step chain");
    return c;
}

TwoStepIntervalMc build_tsimc(const TwoStepMc& c, double delta, double eps_p) {
    if (delta < 0.0 || delta > 1.0) throw InvalidQuery("delta must lie in [0,1]");
    if (eps_p < 0.0 || eps_p >= 1.0) throw InvalidQuery("eps_p must lie in [0,1)");
    TwoStepIntervalMc out;
    out.n_states = c.n_states;
    out.n_nodes = c.n_nodes;
    out.initial_node = c.initial_node;
    out.reward = c.reward;
    out.discount = c.discount;
    out.eps_p = eps_p;
    out.delta = delta;
    out.rows.resize(c.rows.size());
    out.interval_row.assign(c.rows.size(), 0);

    for (std::size_t q = 0; q < c.rows.size(); ++q) {
        auto& row = out.rows[q];
        row.reserve(c.rows[q].size());
        if (c.is_phase1(q)) {
            out.interval_row[q] = 1;
            for (const Transition& e : c.rows[q]) {
                if (eps_p > e.p + kSimplexTol)
                    throw EmptyInterval(
                        "graph-preservation floor " + std::to_string(eps_p) +
                        " exceeds nominal observation probability " + std::to_string(e.p));
                double lo = std::max(e.p - delta, eps_p);
                double hi = std::min(e.p + delta, 1.0);
                row.push_back({e.to, e.p, lo, hi});
            }
        } else {
            for (const Transition& e : c.rows[q]) row.push_back({e.to, e.p, e.p, e.p});
        }
    }
    return out;
}

std::pair<std::vector<PmcParam>, std::vector<PmcGroup>> enumerate_parameters(const Pomdp& m) {
    std::vector<PmcParam> params;
    std::vector<PmcGroup> groups;
    const std::size_t S = m.num_states(), A = m.num_actions(), O = m.num_observations();
    for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t s2 = 0; s2 < S; ++s2) {
            std::vector<std::size_t> support;
            for (std::size_t o = 0; o < O; ++o)
                if (m.z(a, s2, o) > 0.0) support.push_back(o);
            if (support.size() < 2) continue;
            PmcGroup g;
            g.action = a;
            g.next_state = s2;
            g.support = support;
            g.first_param = params.size();
            for (std::size_t i = 0; i + 1 < support.size(); ++i) {
                std::size_t o = support[i];
                params.push_back({a, s2, o, m.z(a, s2, o),
                                  "p[" + m.actions[a] + "|" + m.states[s2] + "|" +
                                      m.observations[o] + "]"});
            }
            groups.push_back(std::move(g));
        }
    }
    return {params, groups};
}

ParametricMc build_pmc(const Pomdp& m, const Fsc& pi) {
    const std::size_t S = m.num_states(), N = pi.num_nodes();
    ParametricMc c;
    c.n_states = S;
    c.n_nodes = N;
    c.discount = m.discount;
    c.initial_node = pi.initial_node;
    std::tie(c.params, c.groups) = enumerate_parameters(m);
    c.rows.resize(1 + S * N);
    c.clusters.resize(1 + S * N);
    c.reward.assign(1 + S * N, 0.0);

    // Group lookup by (a, s').
    std::vector<std::size_t> group_of(m.num_actions() * S, kNoNode);
    for (std::size_t g = 0; g < c.groups.size(); ++g)
        group_of[c.groups[g].action * S + c.groups[g].next_state] = g;

    for (std::size_t s = 0; s < S; ++s) {
        if (m.initial_belief[s] <= 0.0) continue;
        std::size_t to = c.product_index(s, pi.initial_node);
        LinearPoly poly;
        poly.constant = m.initial_belief[s];
        c.rows[0].push_back({to, poly});
        PmcCluster cl;
        cl.weight = m.initial_belief[s];
        cl.branches.push_back({kNoNode, to, kNoNode});
        c.clusters[0].push_back(std::move(cl));
    }

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t n = 0; n < N; ++n) {
            const std::size_t a = pi.action_of[n];
            const std::size_t q = c.product_index(s, n);
            c.reward[q] = m.r(s, a);
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                double tp = m.t(a, s, s2);
                if (tp <= 0.0) continue;
                std::size_t g = group_of[a * S + s2];
                PmcCluster cl;
                cl.weight = tp;
                cl.group = g;
                if (g == kNoNode) {
                    // Deterministic observation: a single constant branch.
                    std::size_t o = 0;
                    for (std::size_t oo = 0; oo < m.num_observations(); ++oo)
                        if (m.z(a, s2, oo) > 0.0) o = oo;
                    std::size_t n2 = pi.next_node(n, o);
                    std::size_t to = n2 == kNoNode ? kNoNode : c.product_index(s2, n2);
                    cl.branches.push_back({o, to, kNoNode});
                } else {
                    const PmcGroup& grp = c.groups[g];
                    for (std::size_t i = 0; i < grp.support.size(); ++i) {
                        std::size_t o = grp.support[i];
                        std::size_t n2 = pi.next_node(n, o);
                        std::size_t to = n2 == kNoNode ? kNoNode : c.product_index(s2, n2);
                        bool dependent = (i + 1 == grp.support.size());
                        cl.branches.push_back(
                            {o, to, dependent ? kNoNode : grp.first_param + i});
                    }
                }
                c.clusters[q].push_back(std::move(cl));
            }
        }
    }

    // Materialize the polynomial rows from the clusters, merging by target.
    for (std::size_t q = 0; q < c.clusters.size(); ++q) {
        if (q == 0) continue;  // already materialized above
        auto& row = c.rows[q];
        for (const PmcCluster& cl : c.clusters[q]) {
            for (const auto& br : cl.branches) {
                if (br.target == kNoNode) continue;  // undefined edge: mass dropped
                LinearPoly piece;
                if (cl.group == kNoNode) {
                    piece.constant = cl.weight;
                } else if (br.param != kNoNode) {
                    piece.terms.push_back({br.param, cl.weight});
                } else {
                    piece.constant = cl.weight;
                    const PmcGroup& grp = c.groups[cl.group];
                    for (std::size_t i = 0; i + 1 < grp.support.size(); ++i)
                        piece.terms.push_back({grp.first_param + i, -cl.weight});
                }
                auto it = std::find_if(row.begin(), row.end(),
                                       [&](const auto& e) { return e.first == br.target; });
                if (it == row.end())
                    row.push_back({br.target, piece});
                else
                    it->second.add(piece, 1.0);
            }
        }
        for (auto& [to, poly] : row) prune_zero_terms(poly);
    }

    // Reachability over nominal support, then validate reachable rows.
    numvec nominal = c.nominal_point();
    std::vector<std::vector<Transition>> point_rows(c.rows.size());
    for (std::size_t q = 0; q < c.rows.size(); ++q)
        for (const auto& [to, poly] : c.rows[q]) {
            double p = poly.eval(nominal);
            if (p > 0.0) point_rows[q].push_back({to, p});
        }
    c.reachable = chain_reachable(point_rows);
    check_reachable_rows_complete(point_rows, c.reachable, "parametric chain");
    return c;
}

numvec ParametricMc::nominal_point() const {
    numvec point(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) point[i] = params[i].nominal;
    return point;
}

numvec Region::center() const {
    numvec c(lower.size());
    for (std::size_t i = 0; i < lower.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

bool Region::contains(const numvec& point, double tol) const {
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (point[i] < lower[i] - tol || point[i] > upper[i] + tol) return false;
    return true;
}

Region region_for_params(const std::vector<PmcParam>& params, double delta, double eps_p) {
    if (delta < 0.0 || delta > 1.0) throw InvalidQuery("delta must lie in [0,1]");
    if (eps_p < 0.0 || eps_p >= 1.0) throw InvalidQuery("eps_p must lie in [0,1)");
    Region r;
    r.lower.resize(params.size());
    r.upper.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        double z = params[i].nominal;
        if (eps_p > z + kSimplexTol)
            throw EmptyInterval("graph-preservation floor " + std::to_string(eps_p) +
                                " exceeds nominal probability of " + params[i].name);
        r.lower[i] = std::max(z - delta, eps_p);
        r.upper[i] = std::min(z + delta, 1.0 - eps_p);
        if (r.lower[i] > r.upper[i] + kSimplexTol)
            throw EmptyInterval("empty interval for " + params[i].name);
        r.upper[i] = std::max(r.upper[i], r.lower[i]);
    }
    return r;
}

Region region_for(const Pomdp& m, double delta, double eps_p) {
    return region_for_params(enumerate_parameters(m).first, delta, eps_p);
}

TwoStepIntervalMc repair_unreachable(TwoStepIntervalMc c) {
    // Reachability over the nominal support.
    std::vector<char> reach(c.rows.size(), 0);
    std::deque<std::size_t> queue{0};
    reach[0] = 1;
    while (!queue.empty()) {
        std::size_t q = queue.front();
        queue.pop_front();
        for (const IntervalTransition& e : c.rows[q]) {
            if (e.nominal > 0.0 && !reach[e.to]) {
                reach[e.to] = 1;
                queue.push_back(e.to);
            }
        }
    }
    for (std::size_t q = 1; q < c.rows.size(); ++q) {
        double sum = 0.0;
        for (const IntervalTransition& e : c.rows[q]) sum += e.nominal;
        if (std::abs(sum - 1.0) <= kSimplexTol) continue;
        if (reach[q])
            throw UndefinedMemoryUpdate("reachable two-step state " + std::to_string(q) +
                                        " has outgoing mass " + std::to_string(sum));
        if (sum <= 0.0) {
            c.rows[q] = {{q, 1.0, 1.0, 1.0}};
            c.interval_row[q] = 0;
        } else {
            for (IntervalTransition& e : c.rows[q]) {
                e.nominal /= sum;
                e.lo /= sum;
                e.hi = std::min(e.hi / sum, 1.0);
            }
        }
    }
    return c;
}

}  // namespace obsrobust
