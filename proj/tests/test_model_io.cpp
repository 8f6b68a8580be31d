#include <doctest.h>

#include <fstream>
#include <sstream>

#include "obsrobust/model_io.hpp"

using namespace obsrobust;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(OBSROBUST_FIXTURE_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("tiger fixture parses to the expected dimensions") {
    Pomdp m = parse_pomdp(fixture("tiger.pomdp"));
    CHECK(m.num_states() == 2);
    CHECK(m.num_actions() == 3);
    CHECK(m.num_observations() == 2);
    CHECK(m.z(m.action_index("listen"), m.state_index("tiger-left"),
              m.observation_index("hear-left")) == 0.85);
}

TEST_CASE("toy rover fixture parses to the appendix parameters") {
    Pomdp m = parse_pomdp(fixture("toy_rover.pomdp"));
    CHECK(m.num_states() == 5);
    CHECK(m.discount == 0.99);
    for (const char* s : {"large-smooth", "large-angular", "small-smooth", "small-angular"})
        CHECK(m.initial_belief[m.state_index(s)] == 0.25);
    CHECK(m.initial_belief[m.state_index("terminal")] == 0.0);
}

TEST_CASE("simplex violations beyond tolerance are semantic errors") {
    std::string doc =
        "states: x y\n"
        "actions: go\n"
        "observations: o\n"
        "discount: 0.9\n"
        "start: uniform\n"
        "T: go : x : x 0.6\n"
        "T: go : x : y 0.6\n"  // row sums to 1.2
        "T: go : y : y 1.0\n"
        "Z: go : x : o 1.0\n"
        "Z: go : y : o 1.0\n";
    CHECK_THROWS_WITH_AS(parse_pomdp(doc), doctest::Contains("T row (s=x, a=go)"), SemanticError);
}

TEST_CASE("unknown identifiers and malformed lines are reported with positions") {
    CHECK_THROWS_AS(parse_pomdp("states: a\nactions: b\nobservations: c\nstart: uniform\n"
                                "T: b : a : nosuch 1\nZ: b : a : c 1\n"),
                    SemanticError);
    try {
        parse_pomdp("states: a\nbogus: 1\n");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.line == 2);
        CHECK(e.col == 1);
    }
}

TEST_CASE("toy rover controller fixture parses to the 7-node policy") {
    Pomdp m = parse_pomdp(fixture("toy_rover.pomdp"));
    ParsedFsc parsed = parse_fsc(fixture("toy_rover.fsc"), m);
    CHECK(parsed.fsc.num_nodes() == 7);
    CHECK(parsed.fsc.nodes[parsed.fsc.initial_node] == "measure-size");
    CHECK(parsed.warnings.empty());
}

TEST_CASE("single self-looping node is a valid controller") {
    Pomdp m = parse_pomdp(fixture("tiger.pomdp"));
    ParsedFsc parsed = parse_fsc(
        "node n1 action=listen initial\non hear-left -> n1\non hear-right -> n1\n", m);
    CHECK(parsed.fsc.num_nodes() == 1);
    CHECK(validate_fsc(m, parsed.fsc).empty());
}

TEST_CASE("duplicate controller edges are rejected") {
    Pomdp m = parse_pomdp(fixture("tiger.pomdp"));
    CHECK_THROWS_AS(
        parse_fsc("node n1 action=listen initial\non hear-left -> n1\non hear-left -> n1\n", m),
        DuplicateEdge);
}

TEST_CASE("controller edges outside the nominal support are warned about") {
    Pomdp m = parse_pomdp(fixture("toy_rover.pomdp"));
    std::string text = fixture("toy_rover.fsc");
    text += "\nnode extra action=go-through\non true -> extra\n";
    // 'extra' is unreachable, but adding a never-received edge to a reachable
    // node triggers the support warning.
    std::string patched = text;
    patched.replace(patched.find("node through-large action=go-through\n"),
                    std::string("node through-large action=go-through\n").size(),
                    "node through-large action=go-through\non true -> through-large\n");
    ParsedFsc parsed = parse_fsc(patched, m);
    bool warned = false;
    for (const std::string& w : parsed.warnings)
        if (w.find("through-large") != std::string::npos) warned = true;
    CHECK(warned);
}

TEST_CASE("unknown actions and observations in controllers are rejected") {
    Pomdp m = parse_pomdp(fixture("tiger.pomdp"));
    CHECK_THROWS_AS(parse_fsc("node n1 action=dance initial\n", m), SemanticError);
    CHECK_THROWS_AS(parse_fsc("node n1 action=listen initial\non smell -> n1\n", m),
                    SemanticError);
}

TEST_CASE("builtin model facts from the case-study definitions") {
    SUBCASE("cancer") {
        auto [m, pi] = builtin(BenchmarkId::cancer);
        CHECK(m.discount == 0.999);
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            CHECK(m.t(a, m.state_index("healthy"), m.state_index("in-situ")) == 0.02);
        CHECK(m.states.size() == 4);
    }
    SUBCASE("part quality control") {
        auto [m, pi] = builtin(BenchmarkId::part_qc_policy1);
        CHECK(m.discount == 1.0);
        CHECK(m.r(m.state_index("failing"), m.action_index("accept")) == -1.0);
        CHECK(pi.num_nodes() == 4);  // measure, re-measure, accept, reject
        auto [m2, pi2] = builtin(BenchmarkId::part_qc_policy2);
        CHECK(pi2.num_nodes() == 5);
    }
    SUBCASE("toy rover rewards") {
        auto [m, pi] = builtin(BenchmarkId::toy_rover);
        CHECK(m.r(m.state_index("large-smooth"), m.action_index("go-through")) == 1.0);
        CHECK(m.r(m.state_index("small-angular"), m.action_index("go-through")) == 1.0);
        CHECK(m.r(m.state_index("large-angular"), m.action_index("go-through")) == 0.0);
        for (const char* s : {"large-smooth", "large-angular", "small-smooth", "small-angular"})
            CHECK(m.r(m.state_index(s), m.action_index("go-around")) == 0.9);
        CHECK(m.r(m.state_index("terminal"), m.action_index("go-around")) == 0.0);
    }
    SUBCASE("rover navigation dimensions") {
        auto [m, pi] = builtin(BenchmarkId::rover_nav);
        CHECK(m.num_states() == 61);
        CHECK(m.discount == 0.99);
    }
    SUBCASE("unknown names are rejected") {
        CHECK_THROWS_AS(benchmark_from_name("rocksample"), UnknownBenchmark);
    }
}

TEST_CASE("policy2 differs from policy1 only in controller and accuracy") {
    auto [m1, p1] = builtin(BenchmarkId::part_qc_policy1);
    auto [m2, p2] = builtin(BenchmarkId::part_qc_policy2);
    CHECK(m1.states == m2.states);
    CHECK(m1.actions == m2.actions);
    CHECK(m1.transition == m2.transition);
    CHECK(m1.reward == m2.reward);
    CHECK(m1.initial_belief == m2.initial_belief);
    CHECK(m2.z(m2.action_index("measure"), m2.state_index("passing"),
               m2.observation_index("pass")) == 0.90234);
    CHECK(p1.nodes != p2.nodes);
}

TEST_CASE("pomdp round-trip is the identity on every builtin") {
    for (const std::string& name : benchmark_names()) {
        CAPTURE(name);
        auto [m, pi] = builtin(benchmark_from_name(name));
        Pomdp back = parse_pomdp(write_pomdp(m));
        CHECK(back.states == m.states);
        CHECK(back.actions == m.actions);
        CHECK(back.observations == m.observations);
        CHECK(back.transition == m.transition);
        CHECK(back.observation_fn == m.observation_fn);
        CHECK(back.reward == m.reward);
        CHECK(back.initial_belief == m.initial_belief);
        CHECK(back.discount == m.discount);
        CHECK(back.horizon == m.horizon);

        ParsedFsc parsed = parse_fsc(write_fsc(pi, m), m);
        CHECK(parsed.fsc.nodes == pi.nodes);
        CHECK(parsed.fsc.initial_node == pi.initial_node);
        CHECK(parsed.fsc.action_of == pi.action_of);
        CHECK(parsed.fsc.memory_update == pi.memory_update);
    }
}

TEST_CASE("result serialization round-trips and keeps the key order") {
    RobustnessResult r;
    r.delta = 0.2;
    r.nominal_value = 0.94010000000000005;
    r.worst_case_value = 0.75;
    r.variant = Variant::sticky;
    r.threshold = 0.0940;
    r.eta = 0.1;
    r.iterations = {{0.0, -0.094}, {1.0, 0.5}, {0.5, 0.25}};
    r.parameter_witness = ParameterWitness{{"p[a|s|o]"}, {0.89}};

    std::string json = write_result(r, ResultFormat::json);
    CHECK(json.find("\"delta\":0.2") != std::string::npos);
    std::size_t k_delta = json.find("\"delta\"");
    std::size_t k_nom = json.find("\"nominal_value\"");
    std::size_t k_worst = json.find("\"worst_case_value\"");
    std::size_t k_variant = json.find("\"variant\"");
    std::size_t k_iter = json.find("\"iterations\"");
    std::size_t k_wit = json.find("\"witness\"");
    CHECK(k_delta < k_nom);
    CHECK(k_nom < k_worst);
    CHECK(k_worst < k_variant);
    CHECK(k_variant < k_iter);
    CHECK(k_iter < k_wit);
    CHECK(results_equal(parse_result(json), r));

    RobustnessResult k = r;
    k.parameter_witness.reset();
    WorstCaseWitness w;
    w.stationary = true;
    w.value_at_initial = 0.75;
    w.kernels = {{{3, {0.25, 0.75}}, {5, {1.0}}}};
    k.kernel_witness = w;
    CHECK(results_equal(parse_result(write_result(k, ResultFormat::json)), k));
}

TEST_CASE("csv sweeps have one data row per result plus a header") {
    std::vector<RobustnessResult> rs(3);
    rs[0].threshold = 1.0;
    rs[1].threshold = 2.0;
    rs[2].threshold = 3.0;
    std::string csv = write_results_csv(rs);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 4);
    CHECK(csv.rfind("threshold,delta,nominal_value,worst_case_value\n", 0) == 0);
}

TEST_CASE("validation reports serialize with an optional non-sticky field") {
    ValidationReport r;
    r.target_eta = 0.25;
    r.delta_used = 0.0149;
    r.eta_witness = 0.25;
    r.eta_sampled_s = 0.2499;
    r.samples = 1000;
    r.seed = 7;
    std::string json = write_report(r);
    CHECK(json.find("\"eta_sampled_ns\":null") != std::string::npos);
    r.eta_sampled_ns = 0.2498;
    CHECK(write_report(r).find("\"eta_sampled_ns\":0.24") != std::string::npos);
}
