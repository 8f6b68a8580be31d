#include "obsrobust/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace obsrobust {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Token {
    std::string text;
    int line;
    int col;
};

/// Splits a document into per-line token lists; '#' starts a comment.
std::vector<std::vector<Token>> tokenize_lines(const std::string& text) {
    std::vector<std::vector<Token>> lines;
    std::vector<Token> current;
    int line = 1, col = 1;
    std::string word;
    int word_col = 1;
    bool comment = false;
    auto flush_word = [&]() {
        if (!word.empty()) {
            current.push_back({word, line, word_col});
            word.clear();
        }
    };
    auto flush_line = [&]() {
        flush_word();
        if (!current.empty()) lines.push_back(std::move(current));
        current.clear();
        comment = false;
        ++line;
        col = 1;
    };
    for (char ch : text) {
        if (ch == '\n') {
            flush_line();
            continue;
        }
        if (ch == '\r') continue;
        if (comment) {
            ++col;
            continue;
        }
        if (ch == '#') {
            flush_word();
            comment = true;
        } else if (ch == ' ' || ch == '\t') {
            flush_word();
        } else {
            if (word.empty()) word_col = col;
            word.push_back(ch);
        }
        ++col;
    }
    flush_line();
    return lines;
}

double parse_number(const Token& t) {
    try {
        std::size_t used = 0;
        double v = std::stod(t.text, &used);
        if (used != t.text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw SyntaxError(t.line, t.col, "a number, got '" + t.text + "'");
    }
}

std::size_t lookup(const std::vector<std::string>& names, const Token& t, const char* what) {
    auto it = std::find(names.begin(), names.end(), t.text);
    if (it == names.end())
        throw SemanticError("line " + std::to_string(t.line) + ": unknown " + what + " '" +
                            t.text + "'");
    return static_cast<std::size_t>(it - names.begin());
}

void expect_colon(const std::vector<Token>& line, std::size_t idx) {
    if (idx >= line.size() || line[idx].text != ":")
        throw SyntaxError(line.front().line,
                          idx < line.size() ? line[idx].col : line.back().col + 1, "':'");
}

}  // namespace

Pomdp parse_pomdp(const std::string& text) {
    Pomdp m;
    m.discount = 0.95;
    bool have_states = false, have_actions = false, have_obs = false, allocated = false,
         have_start = false;
    struct Pending {
        char kind;  // 'T', 'Z', 'R'
        std::size_t i, j, k;
        double value;
        int line;
    };
    std::vector<Pending> pending;
    std::vector<Token> start_tokens;

    auto ensure_allocated = [&](const Token& t) {
        if (allocated) return;
        if (!have_states || !have_actions || !have_obs)
            throw SemanticError("line " + std::to_string(t.line) +
                                ": states/actions/observations must be declared before '" +
                                t.text + "'");
        m.allocate();
        allocated = true;
    };

    for (const auto& line : tokenize_lines(text)) {
        const Token& head = line.front();
        const std::string& key = head.text;
        if (key == "states:" || key == "actions:" || key == "observations:") {
            if (line.size() < 2) throw SyntaxError(head.line, head.col, "at least one name");
            std::vector<std::string> names;
            for (std::size_t i = 1; i < line.size(); ++i) names.push_back(line[i].text);
            if (key == "states:") {
                m.states = names;
                have_states = true;
            } else if (key == "actions:") {
                m.actions = names;
                have_actions = true;
            } else {
                m.observations = names;
                have_obs = true;
            }
        } else if (key == "discount:") {
            if (line.size() != 2) throw SyntaxError(head.line, head.col, "discount: <float>");
            m.discount = parse_number(line[1]);
        } else if (key == "horizon:") {
            if (line.size() != 2) throw SyntaxError(head.line, head.col, "horizon: inf|N");
            if (line[1].text == "inf")
                m.horizon = Horizon::infinite();
            else
                m.horizon = Horizon::finite(static_cast<long>(parse_number(line[1])));
        } else if (key == "start:") {
            if (line.size() < 2) throw SyntaxError(head.line, head.col, "start: uniform|<floats>");
            start_tokens.assign(line.begin() + 1, line.end());
            have_start = true;
        } else if (key == "T:" || key == "Z:" || key == "R:") {
            ensure_allocated(head);
            // T: a : s : s' p   /   Z: a : s' : o p   /   R: s : a r
            if (key == "R:") {
                if (line.size() != 5) throw SyntaxError(head.line, head.col, "R: s : a r");
                expect_colon(line, 2);
                std::size_t s = lookup(m.states, line[1], "state");
                std::size_t a = lookup(m.actions, line[3], "action");
                m.r(s, a) = parse_number(line[4]);
            } else {
                if (line.size() != 7)
                    throw SyntaxError(head.line, head.col,
                                      key == "T:" ? "T: a : s : s' p" : "Z: a : s' : o p");
                expect_colon(line, 2);
                expect_colon(line, 4);
                std::size_t a = lookup(m.actions, line[1], "action");
                if (key == "T:") {
                    std::size_t s = lookup(m.states, line[3], "state");
                    std::size_t s2 = lookup(m.states, line[5], "state");
                    m.t(a, s, s2) = parse_number(line[6]);
                } else {
                    std::size_t s2 = lookup(m.states, line[3], "state");
                    std::size_t o = lookup(m.observations, line[5], "observation");
                    m.z(a, s2, o) = parse_number(line[6]);
                }
            }
        } else {
            throw SyntaxError(head.line, head.col,
                              "one of states:/actions:/observations:/discount:/horizon:/start:/T:/Z:/R:");
        }
    }
    if (!have_states || !have_actions || !have_obs)
        throw SemanticError("document must declare states, actions and observations");
    if (!allocated) m.allocate();
    if (!have_start) throw SemanticError("document must declare a start distribution");
    if (start_tokens.size() == 1 && start_tokens[0].text == "uniform") {
        double u = 1.0 / static_cast<double>(m.num_states());
        for (double& p : m.initial_belief) p = u;
    } else {
        if (start_tokens.size() != m.num_states())
            throw SemanticError("start distribution has " + std::to_string(start_tokens.size()) +
                                " entries for " + std::to_string(m.num_states()) + " states");
        for (std::size_t s = 0; s < m.num_states(); ++s)
            m.initial_belief[s] = parse_number(start_tokens[s]);
    }

    renormalize(m);
    std::vector<Violation> violations = validate_model(m);
    if (!violations.empty())
        throw SemanticError(violations.front().location + ": " + violations.front().message);
    return m;
}

std::string write_pomdp(const Pomdp& m) {
    std::ostringstream out;
    auto names = [&](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& n : v) {
            s += ' ';
            s += n;
        }
        return s;
    };
    out << "states:" << names(m.states) << '\n';
    out << "actions:" << names(m.actions) << '\n';
    out << "observations:" << names(m.observations) << '\n';
    out << "discount: " << fmt17(m.discount) << '\n';
    if (m.horizon.is_infinite)
        out << "horizon: inf\n";
    else
        out << "horizon: " << m.horizon.steps << '\n';
    out << "start:";
    for (double p : m.initial_belief) out << ' ' << fmt17(p);
    out << '\n';
    for (std::size_t a = 0; a < m.num_actions(); ++a)
        for (std::size_t s = 0; s < m.num_states(); ++s)
            for (std::size_t s2 = 0; s2 < m.num_states(); ++s2)
                if (m.t(a, s, s2) != 0.0)
                    out << "T: " << m.actions[a] << " : " << m.states[s] << " : " << m.states[s2]
                        << ' ' << fmt17(m.t(a, s, s2)) << '\n';
    for (std::size_t a = 0; a < m.num_actions(); ++a)
        for (std::size_t s2 = 0; s2 < m.num_states(); ++s2)
            for (std::size_t o = 0; o < m.num_observations(); ++o)
                if (m.z(a, s2, o) != 0.0)
                    out << "Z: " << m.actions[a] << " : " << m.states[s2] << " : "
                        << m.observations[o] << ' ' << fmt17(m.z(a, s2, o)) << '\n';
    for (std::size_t s = 0; s < m.num_states(); ++s)
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            if (m.r(s, a) != 0.0)
                out << "R: " << m.states[s] << " : " << m.actions[a] << ' ' << fmt17(m.r(s, a))
                    << '\n';
    return out.str();
}

ParsedFsc parse_fsc(const std::string& text, const Pomdp& m) {
    ParsedFsc out;
    Fsc& pi = out.fsc;
    std::size_t current = kNoNode;
    bool initial_seen = false;
    struct PendingEdge {
        std::size_t node;
        std::size_t obs;
        Token target;
    };
    std::vector<PendingEdge> edges;

    for (const auto& line : tokenize_lines(text)) {
        const Token& head = line.front();
        if (head.text == "node") {
            if (line.size() < 3 || line.size() > 4)
                throw SyntaxError(head.line, head.col, "node <name> action=<a> [initial]");
            const std::string& name = line[1].text;
            if (std::find(pi.nodes.begin(), pi.nodes.end(), name) != pi.nodes.end())
                throw SemanticError("line " + std::to_string(head.line) + ": duplicate node '" +
                                    name + "'");
            const std::string& act = line[2].text;
            if (act.rfind("action=", 0) != 0)
                throw SyntaxError(line[2].line, line[2].col, "action=<name>");
            Token act_token{act.substr(7), line[2].line, line[2].col + 7};
            std::size_t a = lookup(m.actions, act_token, "action");
            if (line.size() == 4) {
                if (line[3].text != "initial")
                    throw SyntaxError(line[3].line, line[3].col, "'initial'");
                if (initial_seen)
                    throw SemanticError("line " + std::to_string(head.line) +
                                        ": multiple initial nodes");
                initial_seen = true;
                pi.initial_node = pi.nodes.size();
            }
            current = pi.nodes.size();
            pi.nodes.push_back(name);
            pi.action_of.push_back(a);
            pi.memory_update.emplace_back(m.num_observations(), kNoNode);
        } else if (head.text == "on") {
            if (current == kNoNode)
                throw SemanticError("line " + std::to_string(head.line) +
                                    ": edge before any node");
            if (line.size() != 4 || line[2].text != "->")
                throw SyntaxError(head.line, head.col, "on <obs> -> <node>");
            std::size_t o = lookup(m.observations, line[1], "observation");
            if (pi.memory_update[current][o] != kNoNode ||
                std::any_of(edges.begin(), edges.end(), [&](const PendingEdge& e) {
                    return e.node == current && e.obs == o;
                }))
                throw DuplicateEdge("line " + std::to_string(head.line) + ": node '" +
                                    pi.nodes[current] + "' already maps observation '" +
                                    line[1].text + "'");
            edges.push_back({current, o, line[3]});
        } else {
            throw SyntaxError(head.line, head.col, "'node' or 'on'");
        }
    }
    if (pi.nodes.empty()) throw SemanticError("controller has no nodes");
    for (const PendingEdge& e : edges)
        pi.memory_update[e.node][e.obs] = pi.node_index(e.target.text);

    // Warn about edges on observations outside the nominal support of the
    // node's action at the states where the node can be entered.
    std::vector<char> reach = reachable_product_states(m, pi);
    const std::size_t N = pi.num_nodes(), S = m.num_states(), O = m.num_observations();
    for (std::size_t n = 0; n < N; ++n) {
        std::vector<char> support(O, 0);
        std::size_t a = pi.action_of[n];
        for (std::size_t s = 0; s < S; ++s) {
            if (!reach[s * N + n]) continue;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                if (m.t(a, s, s2) <= 0.0) continue;
                for (std::size_t o = 0; o < O; ++o)
                    if (m.z(a, s2, o) > 0.0) support[o] = 1;
            }
        }
        for (std::size_t o = 0; o < O; ++o)
            if (pi.memory_update[n][o] != kNoNode && !support[o])
                out.warnings.push_back("node '" + pi.nodes[n] + "': edge on observation '" +
                                       m.observations[o] +
                                       "' which is never received at this node");
    }
    return out;
}

std::string write_fsc(const Fsc& pi, const Pomdp& m) {
    std::ostringstream out;
    for (std::size_t n = 0; n < pi.num_nodes(); ++n) {
        out << "node " << pi.nodes[n] << " action=" << m.actions[pi.action_of[n]];
        if (n == pi.initial_node) out << " initial";
        out << '\n';
        for (std::size_t o = 0; o < m.num_observations(); ++o)
            if (pi.memory_update[n][o] != kNoNode)
                out << "on " << m.observations[o] << " -> " << pi.nodes[pi.memory_update[n][o]]
                    << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Result serialization.
// ---------------------------------------------------------------------------

namespace {

void append_witness_json(std::ostringstream& out, const RobustnessResult& r) {
    if (r.parameter_witness) {
        const ParameterWitness& w = *r.parameter_witness;
        out << "{\"type\":\"parameters\",\"names\":[";
        for (std::size_t i = 0; i < w.names.size(); ++i) {
            if (i) out << ',';
            out << '"' << w.names[i] << '"';
        }
        out << "],\"values\":[";
        for (std::size_t i = 0; i < w.values.size(); ++i) {
            if (i) out << ',';
            out << fmt17(w.values[i]);
        }
        out << "]}";
    } else if (r.kernel_witness) {
        const WorstCaseWitness& w = *r.kernel_witness;
        out << "{\"type\":\"kernel\",\"stationary\":" << (w.stationary ? "true" : "false")
            << ",\"value\":" << fmt17(w.value_at_initial) << ",\"kernels\":[";
        for (std::size_t k = 0; k < w.kernels.size(); ++k) {
            if (k) out << ',';
            out << '[';
            for (std::size_t i = 0; i < w.kernels[k].size(); ++i) {
                if (i) out << ',';
                out << "{\"state\":" << w.kernels[k][i].state << ",\"probs\":[";
                for (std::size_t j = 0; j < w.kernels[k][i].probs.size(); ++j) {
                    if (j) out << ',';
                    out << fmt17(w.kernels[k][i].probs[j]);
                }
                out << "]}";
            }
            out << ']';
        }
        out << "]}";
    } else {
        out << "null";
    }
}

void append_result_json(std::ostringstream& out, const RobustnessResult& r) {
    out << "{\"delta\":" << fmt17(r.delta) << ",\"nominal_value\":" << fmt17(r.nominal_value)
        << ",\"worst_case_value\":" << fmt17(r.worst_case_value) << ",\"variant\":\""
        << variant_name(r.variant) << "\",\"iterations\":[";
    for (std::size_t i = 0; i < r.iterations.size(); ++i) {
        if (i) out << ',';
        out << "{\"delta\":" << fmt17(r.iterations[i].delta)
            << ",\"f\":" << fmt17(r.iterations[i].f) << '}';
    }
    out << "],\"witness\":";
    append_witness_json(out, r);
    out << ",\"saturated\":" << (r.saturated ? "true" : "false")
        << ",\"threshold\":" << fmt17(r.threshold);
    out << ",\"eta\":";
    if (r.eta)
        out << fmt17(*r.eta);
    else
        out << "null";
    out << '}';
}

}  // namespace

std::string write_result(const RobustnessResult& r, ResultFormat fmt) {
    std::ostringstream out;
    if (fmt == ResultFormat::json) {
        append_result_json(out, r);
        out << '\n';
    } else {
        out << "threshold,delta,nominal_value,worst_case_value\n";
        out << fmt17(r.threshold) << ',' << fmt17(r.delta) << ',' << fmt17(r.nominal_value) << ','
            << fmt17(r.worst_case_value) << '\n';
    }
    return out.str();
}

std::string write_results_csv(const std::vector<RobustnessResult>& results) {
    std::ostringstream out;
    out << "threshold,delta,nominal_value,worst_case_value\n";
    for (const RobustnessResult& r : results)
        out << fmt17(r.threshold) << ',' << fmt17(r.delta) << ',' << fmt17(r.nominal_value) << ','
            << fmt17(r.worst_case_value) << '\n';
    return out.str();
}

std::string write_results_json(const std::vector<RobustnessResult>& results) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (i) out << ',';
        append_result_json(out, results[i]);
    }
    out << "]\n";
    return out.str();
}

RobustnessResult parse_result(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    RobustnessResult r;
    r.delta = j.at("delta").get<double>();
    r.nominal_value = j.at("nominal_value").get<double>();
    r.worst_case_value = j.at("worst_case_value").get<double>();
    r.variant = variant_from_name(j.at("variant").get<std::string>());
    for (const auto& step : j.at("iterations"))
        r.iterations.push_back({step.at("delta").get<double>(), step.at("f").get<double>()});
    if (j.contains("saturated")) r.saturated = j.at("saturated").get<bool>();
    if (j.contains("threshold")) r.threshold = j.at("threshold").get<double>();
    if (j.contains("eta") && !j.at("eta").is_null()) r.eta = j.at("eta").get<double>();
    const auto& w = j.at("witness");
    if (!w.is_null()) {
        if (w.at("type") == "parameters") {
            ParameterWitness pw;
            for (const auto& n : w.at("names")) pw.names.push_back(n.get<std::string>());
            for (const auto& v : w.at("values")) pw.values.push_back(v.get<double>());
            r.parameter_witness = std::move(pw);
        } else {
            WorstCaseWitness kw;
            kw.stationary = w.at("stationary").get<bool>();
            kw.value_at_initial = w.at("value").get<double>();
            for (const auto& kernel : w.at("kernels")) {
                std::vector<KernelRow> rows;
                for (const auto& kr : kernel) {
                    KernelRow row;
                    row.state = kr.at("state").get<std::size_t>();
                    for (const auto& p : kr.at("probs")) row.probs.push_back(p.get<double>());
                    rows.push_back(std::move(row));
                }
                kw.kernels.push_back(std::move(rows));
            }
            r.kernel_witness = std::move(kw);
        }
    }
    return r;
}

bool results_equal(const RobustnessResult& a, const RobustnessResult& b) {
    auto steps_equal = [](const std::vector<BisectionStep>& x, const std::vector<BisectionStep>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].delta != y[i].delta || x[i].f != y[i].f) return false;
        return true;
    };
    if (a.delta != b.delta || a.nominal_value != b.nominal_value ||
        a.worst_case_value != b.worst_case_value || a.variant != b.variant ||
        a.saturated != b.saturated || a.threshold != b.threshold || a.eta != b.eta ||
        !steps_equal(a.iterations, b.iterations))
        return false;
    if (a.parameter_witness.has_value() != b.parameter_witness.has_value()) return false;
    if (a.parameter_witness &&
        (a.parameter_witness->names != b.parameter_witness->names ||
         a.parameter_witness->values != b.parameter_witness->values))
        return false;
    if (a.kernel_witness.has_value() != b.kernel_witness.has_value()) return false;
    if (a.kernel_witness) {
        const auto& x = *a.kernel_witness;
        const auto& y = *b.kernel_witness;
        if (x.stationary != y.stationary || x.value_at_initial != y.value_at_initial ||
            x.kernels.size() != y.kernels.size())
            return false;
        for (std::size_t k = 0; k < x.kernels.size(); ++k) {
            if (x.kernels[k].size() != y.kernels[k].size()) return false;
            for (std::size_t i = 0; i < x.kernels[k].size(); ++i)
                if (x.kernels[k][i].state != y.kernels[k][i].state ||
                    x.kernels[k][i].probs != y.kernels[k][i].probs)
                    return false;
        }
    }
    return true;
}

std::string write_report(const ValidationReport& r) {
    std::ostringstream out;
    out << "{\"target_eta\":" << fmt17(r.target_eta) << ",\"delta_used\":" << fmt17(r.delta_used)
        << ",\"eta_witness\":" << fmt17(r.eta_witness) << ",\"eta_sampled_ns\":";
    if (r.eta_sampled_ns)
        out << fmt17(*r.eta_sampled_ns);
    else
        out << "null";
    out << ",\"eta_sampled_s\":" << fmt17(r.eta_sampled_s) << ",\"samples\":" << r.samples
        << ",\"seed\":" << r.seed << "}\n";
    return out.str();
}

}  // namespace obsrobust
