#include <array>

#include "obsrobust/model_io.hpp"

namespace obsrobust {

namespace {

void set_row(Pomdp& m, std::size_t a, std::size_t s, std::initializer_list<std::pair<std::size_t, double>> entries) {
    for (auto [s2, p] : entries) m.t(a, s, s2) = p;
}

/// Observation rows the source formulation leaves unspecified (movement and
/// terminal states) are completed with a deterministic dummy observation so
/// every row is a distribution. Singleton-support rows cannot be perturbed,
/// which keeps the adversary confined to the measurement rows.
void complete_observation_rows(Pomdp& m, std::size_t dummy_obs) {
    for (std::size_t a = 0; a < m.num_actions(); ++a) {
        for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
            double sum = 0.0;
            for (std::size_t o = 0; o < m.num_observations(); ++o) sum += m.z(a, s2, o);
            if (sum == 0.0) m.z(a, s2, dummy_obs) = 1.0;
        }
    }
}

Fsc make_fsc(const Pomdp& m, std::size_t initial,
             std::initializer_list<std::pair<const char*, const char*>> nodes,
             std::initializer_list<std::array<const char*, 3>> edges) {
    Fsc pi;
    for (auto [name, action] : nodes) {
        pi.nodes.push_back(name);
        pi.action_of.push_back(m.action_index(action));
        pi.memory_update.emplace_back(m.num_observations(), kNoNode);
    }
    pi.initial_node = initial;
    for (const auto& [node, obs, target] : edges)
        pi.memory_update[pi.node_index(node)][m.observation_index(obs)] = pi.node_index(target);
    return pi;
}

std::pair<Pomdp, Fsc> make_tiger() {
    Pomdp m;
    m.states = {"tiger-left", "tiger-right"};
    m.actions = {"listen", "open-left", "open-right"};
    m.observations = {"hear-left", "hear-right"};
    m.discount = 0.95;
    m.allocate();
    const std::size_t L = 0, R = 1;
    const std::size_t listen = 0, open_l = 1, open_r = 2;
    set_row(m, listen, L, {{L, 1.0}});
    set_row(m, listen, R, {{R, 1.0}});
    for (std::size_t a : {open_l, open_r}) {
        set_row(m, a, L, {{L, 0.5}, {R, 0.5}});
        set_row(m, a, R, {{L, 0.5}, {R, 0.5}});
    }
    m.z(listen, L, 0) = 0.85;
    m.z(listen, L, 1) = 0.15;
    m.z(listen, R, 0) = 0.15;
    m.z(listen, R, 1) = 0.85;
    for (std::size_t a : {open_l, open_r})
        for (std::size_t s : {L, R}) {
            m.z(a, s, 0) = 0.5;
            m.z(a, s, 1) = 0.5;
        }
    m.r(L, listen) = -1.0;
    m.r(R, listen) = -1.0;
    m.r(L, open_l) = -100.0;
    m.r(R, open_l) = 10.0;
    m.r(L, open_r) = 10.0;
    m.r(R, open_r) = -100.0;
    m.initial_belief = {0.5, 0.5};

    // Hand-specified controller: open a door only after hearing the same side
    // twice in a row; otherwise fall back to listening from scratch.
    Fsc pi = make_fsc(m, 0,
                      {{"listen-start", "listen"},
                       {"heard-left", "listen"},
                       {"heard-right", "listen"},
                       {"open-right", "open-right"},
                       {"open-left", "open-left"}},
                      {{"listen-start", "hear-left", "heard-left"},
                       {"listen-start", "hear-right", "heard-right"},
                       {"heard-left", "hear-left", "open-right"},
                       {"heard-left", "hear-right", "listen-start"},
                       {"heard-right", "hear-right", "open-left"},
                       {"heard-right", "hear-left", "listen-start"},
                       {"open-right", "hear-left", "listen-start"},
                       {"open-right", "hear-right", "listen-start"},
                       {"open-left", "hear-left", "listen-start"},
                       {"open-left", "hear-right", "listen-start"}});
    return {m, pi};
}

std::pair<Pomdp, Fsc> make_baby() {
    Pomdp m;
    m.states = {"sated", "hungry"};
    m.actions = {"ignore", "feed"};
    m.observations = {"quiet", "crying"};
    m.discount = 0.9;
    m.allocate();
    set_row(m, 0, 0, {{0, 0.9}, {1, 0.1}});
    set_row(m, 0, 1, {{1, 1.0}});
    set_row(m, 1, 0, {{0, 1.0}});
    set_row(m, 1, 1, {{0, 1.0}});
    for (std::size_t a : {0, 1}) {
        m.z(a, 0, 0) = 0.9;
        m.z(a, 0, 1) = 0.1;
        m.z(a, 1, 0) = 0.2;
        m.z(a, 1, 1) = 0.8;
    }
    m.r(1, 0) = -10.0;
    m.r(1, 1) = -15.0;
    m.r(0, 1) = -5.0;
    m.initial_belief = {1.0, 0.0};

    Fsc pi = make_fsc(m, 0, {{"watch", "ignore"}, {"respond", "feed"}},
                      {{"watch", "quiet", "watch"},
                       {"watch", "crying", "respond"},
                       {"respond", "quiet", "watch"},
                       {"respond", "crying", "respond"}});
    return {m, pi};
}

void fill_rover_measurements(Pomdp& m, std::size_t a_size, std::size_t a_texture,
                             const std::vector<std::size_t>& large_states,
                             const std::vector<std::size_t>& small_states,
                             const std::vector<std::size_t>& smooth_states,
                             const std::vector<std::size_t>& angular_states) {
    const std::size_t o_true = 0, o_false = 1;
    for (std::size_t s : large_states) {
        m.z(a_size, s, o_true) = 0.99;
        m.z(a_size, s, o_false) = 0.01;
    }
    for (std::size_t s : small_states) {
        m.z(a_size, s, o_true) = 0.01;
        m.z(a_size, s, o_false) = 0.99;
    }
    for (std::size_t s : smooth_states) {
        m.z(a_texture, s, o_true) = 0.99;
        m.z(a_texture, s, o_false) = 0.01;
    }
    for (std::size_t s : angular_states) {
        m.z(a_texture, s, o_true) = 0.01;
        m.z(a_texture, s, o_false) = 0.99;
    }
}

std::pair<Pomdp, Fsc> make_toy_rover() {
    Pomdp m;
    m.states = {"large-smooth", "large-angular", "small-smooth", "small-angular", "terminal"};
    m.actions = {"measure-size", "measure-texture", "go-through", "go-around"};
    m.observations = {"true", "false"};
    m.discount = 0.99;
    m.allocate();
    const std::size_t LS = 0, LA = 1, SS = 2, SA = 3, TERM = 4;
    const std::size_t ms = 0, mt = 1, gt = 2, ga = 3;
    for (std::size_t s = 0; s < 5; ++s) {
        m.t(ms, s, s) = 1.0;
        m.t(mt, s, s) = 1.0;
        m.t(gt, s, TERM) = 1.0;
        m.t(ga, s, TERM) = 1.0;
    }
    fill_rover_measurements(m, ms, mt, {LS, LA}, {SS, SA}, {LS, SS}, {LA, SA});
    complete_observation_rows(m, m.observation_index("false"));
    // Sand is passable when large and smooth or small and angular.
    m.r(LS, gt) = 1.0;
    m.r(SA, gt) = 1.0;
    for (std::size_t s : {LS, LA, SS, SA}) m.r(s, ga) = 0.9;
    m.initial_belief = {0.25, 0.25, 0.25, 0.25, 0.0};

    Fsc pi = make_fsc(m, 0,
                      {{"measure-size", "measure-size"},
                       {"texture-large", "measure-texture"},
                       {"texture-small", "measure-texture"},
                       {"through-large", "go-through"},
                       {"around-large", "go-around"},
                       {"around-small", "go-around"},
                       {"through-small", "go-through"}},
                      {{"measure-size", "true", "texture-large"},
                       {"measure-size", "false", "texture-small"},
                       {"texture-large", "true", "through-large"},
                       {"texture-large", "false", "around-large"},
                       {"texture-small", "true", "around-small"},
                       {"texture-small", "false", "through-small"},
                       {"through-large", "false", "through-large"},
                       {"around-large", "false", "around-large"},
                       {"around-small", "false", "around-small"},
                       {"through-small", "false", "through-small"}});
    return {m, pi};
}

/**
 * Navigation version of the rover course on a 3 x 5 grid (columns x in 1..3,
 * rows y in 1..5; moves off the grid are no-ops). The rover starts at (3,1)
 * and the target is (3,5), which pays 1.0 once and then terminates. The
 * through-corridor runs straight up column 3 across the sand cells (3,3) and
 * (3,4); leaving a sand cell with impassable sand strands the rover. The
 * go-around corridor detours through column 1 and pays the left-action
 * penalty of -0.1 twice.
 */
std::pair<Pomdp, Fsc> make_rover_nav() {
    Pomdp m;
    const std::vector<std::string> sands = {"large-smooth", "large-angular", "small-smooth",
                                            "small-angular"};
    for (const std::string& sand : sands)
        for (int x = 1; x <= 3; ++x)
            for (int y = 1; y <= 5; ++y)
                m.states.push_back(sand + "-" + std::to_string(x) + "-" + std::to_string(y));
    m.states.push_back("terminal");
    m.actions = {"measure-size", "measure-texture", "up", "down", "left", "right"};
    m.observations = {"true", "false"};
    m.discount = 0.99;
    m.allocate();

    const std::size_t TERM = m.num_states() - 1;
    auto sid = [&](std::size_t sand, int x, int y) {
        return sand * 15 + static_cast<std::size_t>((x - 1) * 5 + (y - 1));
    };
    auto traversable = [&](std::size_t sand) { return sand == 0 || sand == 3; };
    auto is_sand_cell = [](int x, int y) { return x == 3 && (y == 3 || y == 4); };

    const int dir[6][2] = {{0, 0}, {0, 0}, {0, 1}, {0, -1}, {-1, 0}, {1, 0}};
    for (std::size_t a = 0; a < 6; ++a) {
        m.t(a, TERM, TERM) = 1.0;
        for (std::size_t sand = 0; sand < 4; ++sand) {
            for (int x = 1; x <= 3; ++x) {
                for (int y = 1; y <= 5; ++y) {
                    std::size_t s = sid(sand, x, y);
                    if (x == 3 && y == 5) {
                        m.t(a, s, TERM) = 1.0;  // target reached
                    } else if (is_sand_cell(x, y) && !traversable(sand)) {
                        m.t(a, s, TERM) = 1.0;  // stuck in the sand
                    } else {
                        int nx = x + dir[a][0], ny = y + dir[a][1];
                        if (nx < 1 || nx > 3 || ny < 1 || ny > 5) {
                            nx = x;
                            ny = y;
                        }
                        m.t(a, s, sid(sand, nx, ny)) = 1.0;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> large, small, smooth, angular;
    for (std::size_t sand = 0; sand < 4; ++sand)
        for (int x = 1; x <= 3; ++x)
            for (int y = 1; y <= 5; ++y) {
                std::size_t s = sid(sand, x, y);
                (sand < 2 ? large : small).push_back(s);
                (sand % 2 == 0 ? smooth : angular).push_back(s);
            }
    fill_rover_measurements(m, 0, 1, large, small, smooth, angular);
    complete_observation_rows(m, m.observation_index("false"));

    const std::size_t a_left = 4;
    for (std::size_t sand = 0; sand < 4; ++sand) {
        for (std::size_t a = 0; a < 6; ++a) m.r(sid(sand, 3, 5), a) = 1.0;
        for (int x = 1; x <= 3; ++x)
            for (int y = 1; y <= 5; ++y)
                if (!(x == 3 && y == 5)) m.r(sid(sand, x, y), a_left) = -0.1;
    }
    for (std::size_t sand = 0; sand < 4; ++sand) m.initial_belief[sid(sand, 3, 1)] = 0.25;

    // The decision head mirrors the toy-rover controller; the corridors are
    // unrolled movement macros that converge on a terminal wait node.
    std::vector<std::pair<const char*, const char*>> nodes = {
        {"measure-size", "measure-size"},
        {"texture-large", "measure-texture"},
        {"texture-small", "measure-texture"},
        {"through-1", "up"},
        {"through-2", "up"},
        {"through-3", "up"},
        {"through-4", "up"},
        {"around-1", "left"},
        {"around-2", "left"},
        {"around-3", "up"},
        {"around-4", "up"},
        {"around-5", "up"},
        {"around-6", "up"},
        {"around-7", "right"},
        {"around-8", "right"},
        {"at-goal", "up"},
    };
    Fsc pi;
    for (auto [name, action] : nodes) {
        pi.nodes.push_back(name);
        pi.action_of.push_back(m.action_index(action));
        pi.memory_update.emplace_back(m.num_observations(), kNoNode);
    }
    pi.initial_node = 0;
    const std::size_t o_true = 0, o_false = 1;
    auto edge = [&](const char* from, std::size_t o, const char* to) {
        pi.memory_update[pi.node_index(from)][o] = pi.node_index(to);
    };
    edge("measure-size", o_true, "texture-large");
    edge("measure-size", o_false, "texture-small");
    edge("texture-large", o_true, "through-1");
    edge("texture-large", o_false, "around-1");
    edge("texture-small", o_true, "around-1");
    edge("texture-small", o_false, "through-1");
    const char* through_chain[] = {"through-1", "through-2", "through-3", "through-4", "at-goal"};
    for (int i = 0; i < 4; ++i) edge(through_chain[i], o_false, through_chain[i + 1]);
    const char* around_chain[] = {"around-1", "around-2", "around-3", "around-4", "around-5",
                                  "around-6", "around-7", "around-8", "at-goal"};
    for (int i = 0; i < 8; ++i) edge(around_chain[i], o_false, around_chain[i + 1]);
    edge("at-goal", o_false, "at-goal");
    return {m, pi};
}

std::pair<Pomdp, Fsc> make_cancer() {
    Pomdp m;
    m.states = {"healthy", "in-situ", "invasive", "death"};
    m.actions = {"wait", "test", "treat"};
    m.observations = {"positive", "negative", "dead"};
    m.discount = 0.999;
    m.allocate();
    const std::size_t H = 0, IS = 1, IV = 2, D = 3;
    const std::size_t wait = 0, test = 1, treat = 2;
    for (std::size_t a : {wait, test, treat}) {
        set_row(m, a, H, {{IS, 0.02}, {H, 0.98}});
        set_row(m, a, D, {{D, 1.0}});
    }
    for (std::size_t a : {wait, test}) {
        set_row(m, a, IS, {{IV, 0.1}, {IS, 0.9}});
        set_row(m, a, IV, {{D, 0.6}, {IV, 0.4}});
    }
    set_row(m, treat, IS, {{H, 0.6}, {IS, 0.4}});
    set_row(m, treat, IV, {{H, 0.2}, {D, 0.2}, {IV, 0.6}});

    const std::size_t pos = 0, neg = 1, dead = 2;
    for (std::size_t a : {wait, test, treat}) m.z(a, D, dead) = 1.0;
    for (std::size_t s : {H, IS, IV}) m.z(wait, s, neg) = 1.0;
    m.z(test, H, pos) = 0.05;
    m.z(test, H, neg) = 0.95;
    m.z(test, IS, pos) = 0.8;
    m.z(test, IS, neg) = 0.2;
    m.z(test, IV, pos) = 1.0;
    m.z(treat, H, neg) = 1.0;
    m.z(treat, IS, pos) = 1.0;
    m.z(treat, IV, pos) = 1.0;

    for (std::size_t s : {H, IS, IV}) {
        m.r(s, wait) = 1.0;
        m.r(s, test) = 0.8;
        m.r(s, treat) = 0.1;
    }
    m.initial_belief = {1.0, 0.0, 0.0, 0.0};

    // Screening policy: four wait steps, then test in pairs; two positives
    // trigger treatment, two negatives return to waiting, and a disagreeing
    // pair restarts the test sequence.
    Fsc pi = make_fsc(
        m, 0,
        {{"wait-1", "wait"},
         {"wait-2", "wait"},
         {"wait-3", "wait"},
         {"wait-4", "wait"},
         {"test-first", "test"},
         {"test-pos", "test"},
         {"test-neg", "test"},
         {"treat", "treat"},
         {"dead-sink", "wait"}},
        {{"wait-1", "negative", "wait-2"},   {"wait-1", "dead", "dead-sink"},
         {"wait-2", "negative", "wait-3"},   {"wait-2", "dead", "dead-sink"},
         {"wait-3", "negative", "wait-4"},   {"wait-3", "dead", "dead-sink"},
         {"wait-4", "negative", "test-first"}, {"wait-4", "dead", "dead-sink"},
         {"test-first", "positive", "test-pos"}, {"test-first", "negative", "test-neg"},
         {"test-first", "dead", "dead-sink"},
         {"test-pos", "positive", "treat"},  {"test-pos", "negative", "test-first"},
         {"test-pos", "dead", "dead-sink"},
         {"test-neg", "positive", "test-first"}, {"test-neg", "negative", "wait-1"},
         {"test-neg", "dead", "dead-sink"},
         {"treat", "positive", "wait-1"},    {"treat", "negative", "wait-1"},
         {"treat", "dead", "dead-sink"},
         {"dead-sink", "dead", "dead-sink"}});
    return {m, pi};
}

std::pair<Pomdp, Fsc> make_part_qc(double accuracy, bool second_policy) {
    Pomdp m;
    m.states = {"passing", "failing", "terminal"};
    m.actions = {"measure", "accept", "reject"};
    m.observations = {"pass", "fail"};
    m.discount = 1.0;
    m.horizon = Horizon::finite(200);
    m.allocate();
    const std::size_t P = 0, F = 1, TERM = 2;
    const std::size_t measure = 0, accept = 1, reject = 2;
    for (std::size_t s : {P, F, TERM}) {
        m.t(measure, s, s) = 1.0;
        m.t(accept, s, TERM) = 1.0;
        m.t(reject, s, TERM) = 1.0;
    }
    m.z(measure, P, 0) = accuracy;
    m.z(measure, P, 1) = 1.0 - accuracy;
    m.z(measure, F, 1) = accuracy;
    m.z(measure, F, 0) = 1.0 - accuracy;
    complete_observation_rows(m, m.observation_index("pass"));
    m.r(F, accept) = -1.0;
    m.initial_belief = {0.5, 0.5, 0.0};

    Fsc pi;
    if (!second_policy) {
        // Accept on the first pass; re-measure once on a fail.
        pi = make_fsc(m, 0,
                      {{"measure-1", "measure"},
                       {"measure-2", "measure"},
                       {"accept", "accept"},
                       {"reject", "reject"}},
                      {{"measure-1", "pass", "accept"},
                       {"measure-1", "fail", "measure-2"},
                       {"measure-2", "pass", "accept"},
                       {"measure-2", "fail", "reject"},
                       {"accept", "pass", "measure-1"},
                       {"reject", "pass", "measure-1"}});
    } else {
        // Measure until two consecutive observations agree.
        pi = make_fsc(m, 0,
                      {{"measure-first", "measure"},
                       {"seen-pass", "measure"},
                       {"seen-fail", "measure"},
                       {"accept", "accept"},
                       {"reject", "reject"}},
                      {{"measure-first", "pass", "seen-pass"},
                       {"measure-first", "fail", "seen-fail"},
                       {"seen-pass", "pass", "accept"},
                       {"seen-pass", "fail", "seen-fail"},
                       {"seen-fail", "fail", "reject"},
                       {"seen-fail", "pass", "seen-pass"},
                       {"accept", "pass", "measure-first"},
                       {"reject", "pass", "measure-first"}});
    }
    return {m, pi};
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = {
        "toy-rover", "rover-nav", "cancer", "part-qc-policy1", "part-qc-policy2", "tiger", "baby"};
    return names;
}

BenchmarkId benchmark_from_name(const std::string& name) {
    const auto& names = benchmark_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<BenchmarkId>(i);
    throw UnknownBenchmark("unknown benchmark '" + name + "'");
}

std::string benchmark_name(BenchmarkId id) {
    return benchmark_names()[static_cast<std::size_t>(id)];
}

std::pair<Pomdp, Fsc> builtin(BenchmarkId id) {
    std::pair<Pomdp, Fsc> out;
    switch (id) {
        case BenchmarkId::toy_rover: out = make_toy_rover(); break;
        case BenchmarkId::rover_nav: out = make_rover_nav(); break;
        case BenchmarkId::cancer: out = make_cancer(); break;
        case BenchmarkId::part_qc_policy1: out = make_part_qc(0.99, false); break;
        case BenchmarkId::part_qc_policy2: out = make_part_qc(0.90234, true); break;
        case BenchmarkId::tiger: out = make_tiger(); break;
        case BenchmarkId::baby: out = make_baby(); break;
        default: throw UnknownBenchmark("unknown benchmark id");
    }
    renormalize(out.first);
    return out;
}

}  // namespace obsrobust
