#include "obsrobust/pomdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace obsrobust {

void Pomdp::allocate() {
    transition.assign(num_actions() * num_states() * num_states(), 0.0);
    observation_fn.assign(num_actions() * num_states() * num_observations(), 0.0);
    reward.assign(num_states() * num_actions(), 0.0);
    initial_belief.assign(num_states(), 0.0);
}

namespace {

std::size_t find_name(const std::vector<std::string>& names, const std::string& name,
                      const char* what) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ModelError(std::string("unknown ") + what + " '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::size_t Pomdp::state_index(const std::string& name) const {
    return find_name(states, name, "state");
}
std::size_t Pomdp::action_index(const std::string& name) const {
    return find_name(actions, name, "action");
}
std::size_t Pomdp::observation_index(const std::string& name) const {
    return find_name(observations, name, "observation");
}
std::size_t Fsc::node_index(const std::string& name) const {
    return find_name(nodes, name, "node");
}

std::vector<Violation> validate_model(const Pomdp& m) {
    std::vector<Violation> out;
    const std::size_t S = m.num_states(), A = m.num_actions(), O = m.num_observations();
    if (S == 0) out.push_back({"states", "state set is empty"});
    if (A == 0) out.push_back({"actions", "action set is empty"});
    if (O == 0) out.push_back({"observations", "observation set is empty"});
    if (!out.empty()) return out;

    for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t s = 0; s < S; ++s) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                double p = m.t(a, s, s2);
                if (p < 0.0 || p > 1.0 + kSimplexTol)
                    out.push_back({"T(" + m.states[s2] + "|" + m.states[s] + "," + m.actions[a] + ")",
                                   "probability out of range: " + std::to_string(p)});
                sum += p;
            }
            if (std::abs(sum - 1.0) > kSimplexTol)
                out.push_back({"T row (s=" + m.states[s] + ", a=" + m.actions[a] + ")",
                               "row sums to " + std::to_string(sum)});
        }
    }
    for (std::size_t a = 0; a < A; ++a) {
        for (std::size_t s2 = 0; s2 < S; ++s2) {
            double sum = 0.0;
            for (std::size_t o = 0; o < O; ++o) {
                double p = m.z(a, s2, o);
                if (p < 0.0 || p > 1.0 + kSimplexTol)
                    out.push_back({"Z(" + m.observations[o] + "|" + m.actions[a] + "," + m.states[s2] + ")",
                                   "probability out of range: " + std::to_string(p)});
                sum += p;
            }
            if (std::abs(sum - 1.0) > kSimplexTol)
                out.push_back({"Z row (a=" + m.actions[a] + ", s'=" + m.states[s2] + ")",
                               "row sums to " + std::to_string(sum)});
        }
    }
    {
        double sum = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double p = m.initial_belief[s];
            if (p < 0.0)
                out.push_back({"b0(" + m.states[s] + ")", "negative entry: " + std::to_string(p)});
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSimplexTol)
            out.push_back({"b0", "belief sums to " + std::to_string(sum)});
    }
    if (m.discount < 0.0 || m.discount > 1.0)
        out.push_back({"discount", "discount outside [0,1]: " + std::to_string(m.discount)});
    if (m.horizon.is_infinite && m.discount >= 1.0)
        out.push_back({"discount", "infinite horizon requires discount < 1"});
    if (!m.horizon.is_infinite && m.horizon.steps < 0)
        out.push_back({"horizon", "negative horizon"});
    return out;
}

std::vector<Violation> validate_fsc(const Pomdp& m, const Fsc& pi) {
    std::vector<Violation> out;
    const std::size_t N = pi.num_nodes();
    if (N == 0) {
        out.push_back({"nodes", "node set is empty"});
        return out;
    }
    if (pi.initial_node >= N) out.push_back({"initial", "initial node index out of range"});
    if (pi.action_of.size() != N) out.push_back({"action_of", "action map is not total"});
    for (std::size_t n = 0; n < N && n < pi.action_of.size(); ++n) {
        if (pi.action_of[n] >= m.num_actions())
            out.push_back({"node " + pi.nodes[n], "action index out of range"});
        if (pi.memory_update[n].size() != m.num_observations())
            out.push_back({"node " + pi.nodes[n], "memory update row has wrong arity"});
        for (std::size_t o = 0; o < pi.memory_update[n].size(); ++o) {
            std::size_t n2 = pi.memory_update[n][o];
            if (n2 != kNoNode && n2 >= N)
                out.push_back({"node " + pi.nodes[n], "edge target out of range"});
        }
    }
    // Nodes unreachable from the initial node are a warning-level finding.
    std::vector<char> seen(N, 0);
    std::deque<std::size_t> queue{pi.initial_node};
    seen[pi.initial_node] = 1;
    while (!queue.empty()) {
        std::size_t n = queue.front();
        queue.pop_front();
        for (std::size_t n2 : pi.memory_update[n]) {
            if (n2 != kNoNode && !seen[n2]) {
                seen[n2] = 1;
                queue.push_back(n2);
            }
        }
    }
    for (std::size_t n = 0; n < N; ++n)
        if (!seen[n])
            out.push_back({"node " + pi.nodes[n], "warning: unreachable from the initial node"});
    return out;
}

Belief belief_update(const Belief& b, std::size_t a, std::size_t o, const Pomdp& m) {
    const std::size_t S = m.num_states();
    if (b.probs.size() != S) throw IndexMismatch("belief has wrong dimension");
    if (a >= m.num_actions() || o >= m.num_observations())
        throw IndexMismatch("action or observation index out of range");

    Belief post;
    post.probs.assign(S, 0.0);
    double norm = 0.0;
    for (std::size_t s2 = 0; s2 < S; ++s2) {
        double pred = 0.0;
        for (std::size_t s = 0; s < S; ++s) pred += m.t(a, s, s2) * b.probs[s];
        double w = m.z(a, s2, o) * pred;
        post.probs[s2] = w;
        norm += w;
    }
    if (norm <= 0.0)
        throw ImpossibleObservation("observation '" + m.observations[o] +
                                    "' has zero probability under action '" + m.actions[a] + "'");
    for (double& p : post.probs) p /= norm;
    return post;
}

std::vector<char> reachable_product_states(const Pomdp& m, const Fsc& pi) {
    const std::size_t S = m.num_states(), N = pi.num_nodes(), O = m.num_observations();
    std::vector<char> reach(S * N, 0);
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < S; ++s) {
        if (m.initial_belief[s] > 0.0 && !reach[s * N + pi.initial_node]) {
            reach[s * N + pi.initial_node] = 1;
            queue.push_back(s * N + pi.initial_node);
        }
    }
    while (!queue.empty()) {
        std::size_t q = queue.front();
        queue.pop_front();
        std::size_t s = q / N, n = q % N;
        std::size_t a = pi.action_of[n];
        for (std::size_t s2 = 0; s2 < S; ++s2) {
            if (m.t(a, s, s2) <= 0.0) continue;
            for (std::size_t o = 0; o < O; ++o) {
                if (m.z(a, s2, o) <= 0.0) continue;
                std::size_t n2 = pi.next_node(n, o);
                if (n2 == kNoNode) continue;
                if (!reach[s2 * N + n2]) {
                    reach[s2 * N + n2] = 1;
                    queue.push_back(s2 * N + n2);
                }
            }
        }
    }
    return reach;
}

FscEvaluation fsc_value(const Pomdp& m, const Fsc& pi, Horizon horizon, double eps) {
    const std::size_t S = m.num_states(), N = pi.num_nodes(), O = m.num_observations();
    if (pi.action_of.size() != N || pi.memory_update.size() != N)
        throw IndexMismatch("controller tables have inconsistent sizes");
    for (std::size_t n = 0; n < N; ++n) {
        if (pi.action_of[n] >= m.num_actions()) throw IndexMismatch("node action out of range");
        if (pi.memory_update[n].size() != O) throw IndexMismatch("memory update arity mismatch");
    }
    const double gamma = m.discount;
    if (horizon.is_infinite && gamma >= 1.0)
        throw NonContractive("infinite horizon requires discount < 1");

    std::vector<char> reach = reachable_product_states(m, pi);

    // Precompute the composite product-chain rows: (s, n) -> [(s', n'), prob].
    struct Entry {
        std::size_t to;
        double p;
    };
    std::vector<std::vector<Entry>> rows(S * N);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t n = 0; n < N; ++n) {
            std::size_t a = pi.action_of[n];
            auto& row = rows[s * N + n];
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                double tp = m.t(a, s, s2);
                if (tp <= 0.0) continue;
                for (std::size_t o = 0; o < O; ++o) {
                    double zp = m.z(a, s2, o);
                    if (zp <= 0.0) continue;
                    std::size_t n2 = pi.next_node(n, o);
                    if (n2 == kNoNode) {
                        if (reach[s * N + n])
                            throw UndefinedMemoryUpdate(
                                "memory update undefined for node '" + pi.nodes[n] +
                                "' on observation '" + m.observations[o] +
                                "' reachable with positive probability");
                        continue;  // unreachable: drop the mass
                    }
                    row.push_back({s2 * N + n2, tp * zp});
                }
            }
        }
    }

    numvec value(S * N, 0.0), next(S * N, 0.0);
    auto sweep = [&]() {
        double resid = 0.0;
        for (std::size_t q = 0; q < S * N; ++q) {
            double acc = 0.0;
            for (const Entry& e : rows[q]) acc += e.p * value[e.to];
            double v = m.r(q / N, pi.action_of[q % N]) + gamma * acc;
            next[q] = v;
            resid = std::max(resid, std::abs(v - value[q]));
        }
        value.swap(next);
        return resid;
    };

    FscEvaluation out;
    if (!horizon.is_infinite) {
        for (long i = 0; i < horizon.steps; ++i) out.residual = sweep();
        out.sweeps = static_cast<std::size_t>(horizon.steps);
    } else {
        const double stop = gamma > 0.0 ? eps * (1.0 - gamma) / gamma
                                        : std::numeric_limits<double>::infinity();
        double resid;
        do {
            resid = sweep();
            ++out.sweeps;
        } while (resid > stop);
        out.residual = resid;
    }
    out.table = value;
    for (std::size_t s = 0; s < S; ++s)
        out.initial_value += m.initial_belief[s] * value[s * N + pi.initial_node];
    return out;
}

void renormalize(Pomdp& m, double tol) {
    const std::size_t S = m.num_states(), A = m.num_actions(), O = m.num_observations();
    auto fix = [&](double* begin, std::size_t len) {
        double sum = 0.0;
        for (std::size_t i = 0; i < len; ++i) sum += begin[i];
        if (sum > 0.0 && std::abs(sum - 1.0) <= tol && sum != 1.0)
            for (std::size_t i = 0; i < len; ++i) begin[i] /= sum;
    };
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t s = 0; s < S; ++s) fix(&m.t(a, s, 0), S);
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t s2 = 0; s2 < S; ++s2) fix(&m.z(a, s2, 0), O);
    fix(m.initial_belief.data(), S);
}

}  // namespace obsrobust
