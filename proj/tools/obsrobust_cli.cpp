#include "obsrobust_cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "obsrobust/model_io.hpp"
#include "obsrobust/validation.hpp"

namespace obsrobust::cli {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CommonOptions {
    std::string benchmark;
    std::string model_file;
    std::string fsc_file;
    std::string horizon = "inf";
    double discount = -1.0;  // < 0 means "not given"
    std::string out_file;
};

void add_model_options(CLI::App* cmd, CommonOptions& opt) {
    auto* bench = cmd->add_option("--benchmark", opt.benchmark,
                                  "Built-in benchmark (toy-rover, rover-nav, cancer, "
                                  "part-qc-policy1, part-qc-policy2, tiger, baby)");
    auto* model = cmd->add_option("--model", opt.model_file, "POMDP model file (.pomdp)");
    auto* fsc = cmd->add_option("--fsc", opt.fsc_file, "Controller file (.fsc)");
    bench->excludes(model);
    model->needs(fsc);
    cmd->add_option("--horizon", opt.horizon, "Evaluation horizon: inf or a step count")
        ->default_val("inf");
    cmd->add_option("--discount", opt.discount,
                    "Discount override. Finite horizons are undiscounted unless this is given; "
                    "infinite horizons use the model's discount.");
    cmd->add_option("--out", opt.out_file, "Write machine output to a file instead of stdout");
}

Horizon parse_horizon(const std::string& text) {
    if (text == "inf") return Horizon::infinite();
    try {
        std::size_t used = 0;
        long steps = std::stol(text, &used);
        if (used != text.size() || steps <= 0) throw std::invalid_argument("horizon");
        return Horizon::finite(steps);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--horizon", "expected 'inf' or a positive integer");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::pair<Pomdp, Fsc> load_model(const CommonOptions& opt, std::ostream& err) {
    if (!opt.benchmark.empty()) return builtin(benchmark_from_name(opt.benchmark));
    if (opt.model_file.empty())
        throw CLI::RequiredError("--benchmark or --model/--fsc");
    Pomdp m = parse_pomdp(read_file(opt.model_file));
    ParsedFsc parsed = parse_fsc(read_file(opt.fsc_file), m);
    for (const std::string& w : parsed.warnings) err << "warning: " << w << '\n';
    return {std::move(m), std::move(parsed.fsc)};
}

void emit(const CommonOptions& opt, const std::string& text, std::ostream& out) {
    if (opt.out_file.empty()) {
        out << text;
    } else {
        std::ofstream f(opt.out_file, std::ios::binary);
        if (!f) throw ModelError("cannot write '" + opt.out_file + "'");
        f << text;
    }
}

std::vector<double> parse_threshold_list(const std::string& text, const char* flag) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument("number");
        } catch (const std::exception&) {
            throw CLI::ValidationError(flag, "expected a comma-separated list of numbers");
        }
    }
    if (values.empty()) throw CLI::ValidationError(flag, "empty list");
    return values;
}

struct QueryOptions {
    std::string variant = "nonsticky";
    std::string eta;
    std::string delta_threshold;
    double eps_mbs = 1e-7;
    double eps_inner = 1e-7;
    double eps_p = -1.0;  // < 0 means variant default
};

void add_query_options(CLI::App* cmd, QueryOptions& opt, bool list_thresholds) {
    cmd->add_option("--variant", opt.variant, "sticky or nonsticky")
        ->check(CLI::IsMember({"sticky", "nonsticky"}))
        ->default_val("nonsticky");
    const char* eta_help = list_thresholds
                               ? "Relative degradation threshold(s), comma separated"
                               : "Relative degradation threshold eta (Delta = eta*|V0|)";
    const char* abs_help = list_thresholds ? "Absolute degradation threshold(s), comma separated"
                                           : "Absolute degradation threshold Delta";
    auto* eta = cmd->add_option("--eta", opt.eta, eta_help);
    auto* abs = cmd->add_option("--delta-threshold", opt.delta_threshold, abs_help);
    eta->excludes(abs);
    abs->excludes(eta);
    cmd->add_option("--eps-mbs", opt.eps_mbs, "Bisection tolerance")->default_val(1e-7);
    cmd->add_option("--eps-inner", opt.eps_inner, "Inner evaluation tolerance")
        ->default_val(1e-7);
    cmd->add_option("--eps-p", opt.eps_p,
                    "Graph-preservation floor (default 0 nonsticky, 0.01 sticky)");
}

RobustnessQuery build_query(const CommonOptions& copt, const QueryOptions& qopt,
                            std::pair<Pomdp, Fsc> model, double threshold, bool relative) {
    RobustnessQuery q;
    q.model = std::move(model.first);
    q.policy = std::move(model.second);
    q.variant = variant_from_name(qopt.variant);
    if (relative)
        q.eta = threshold;
    else
        q.delta_threshold = threshold;
    q.horizon = parse_horizon(copt.horizon);
    q.eps_mbs = qopt.eps_mbs;
    q.eps_inner = qopt.eps_inner;
    if (qopt.eps_p >= 0.0) q.eps_p = qopt.eps_p;
    if (copt.discount >= 0.0) q.discount_override = copt.discount;
    return q;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Admissible observation-model deviation analysis for POMDP controllers"};
    app.require_subcommand(1);

    CommonOptions eval_opt;
    double eval_eps = 1e-7;
    auto* eval_cmd = app.add_subcommand("eval", "Nominal policy value");
    add_model_options(eval_cmd, eval_opt);
    eval_cmd->add_option("--eps-inner", eval_eps, "Value-iteration tolerance")->default_val(1e-7);

    CommonOptions analyze_opt;
    QueryOptions analyze_q;
    std::string analyze_format = "json";
    auto* analyze_cmd = app.add_subcommand("analyze", "Maximum admissible deviation for one threshold");
    add_model_options(analyze_cmd, analyze_opt);
    add_query_options(analyze_cmd, analyze_q, false);
    analyze_cmd->add_option("--format", analyze_format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->default_val("json");

    CommonOptions sweep_opt;
    QueryOptions sweep_q;
    std::string sweep_format = "csv";
    auto* sweep_cmd = app.add_subcommand("sweep", "Deviation curve over a threshold list");
    add_model_options(sweep_cmd, sweep_opt);
    add_query_options(sweep_cmd, sweep_q, true);
    sweep_cmd->add_option("--format", sweep_format, "json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->default_val("csv");

    CommonOptions validate_opt;
    QueryOptions validate_q;
    std::size_t validate_samples = 10000;
    std::uint64_t validate_seed = 0;
    auto* validate_cmd =
        app.add_subcommand("validate", "Extrema-sampling validation of a solved query");
    add_model_options(validate_cmd, validate_opt);
    add_query_options(validate_cmd, validate_q, false);
    validate_cmd->add_option("--samples", validate_samples, "Sample count")->default_val(10000);
    validate_cmd->add_option("--seed", validate_seed, "RNG seed")->default_val(0);

    CommonOptions sim_opt;
    std::size_t sim_rollouts = 10000;
    std::uint64_t sim_seed = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo rollouts of the nominal model");
    add_model_options(sim_cmd, sim_opt);
    sim_cmd->add_option("--samples", sim_rollouts, "Rollout count")->default_val(10000);
    sim_cmd->add_option("--seed", sim_seed, "RNG seed")->default_val(0);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (eval_cmd->parsed()) {
            auto [m, pi] = load_model(eval_opt, err);
            Horizon h = parse_horizon(eval_opt.horizon);
            if (eval_opt.discount >= 0.0)
                m.discount = eval_opt.discount;
            else if (!h.is_infinite)
                m.discount = 1.0;
            FscEvaluation v = fsc_value(m, pi, h, eval_eps);
            std::ostringstream json;
            json << "{\"nominal_value\":" << fmt17(v.initial_value)
                 << ",\"discount\":" << fmt17(m.discount) << ",\"horizon\":\""
                 << eval_opt.horizon << "\"}\n";
            emit(eval_opt, json.str(), out);
            err << "nominal value: " << v.initial_value << '\n';
        } else if (analyze_cmd->parsed()) {
            if (analyze_q.eta.empty() == analyze_q.delta_threshold.empty())
                throw CLI::RequiredError("exactly one of --eta / --delta-threshold");
            bool relative = !analyze_q.eta.empty();
            double threshold =
                std::stod(relative ? analyze_q.eta : analyze_q.delta_threshold);
            RobustnessQuery q = build_query(analyze_opt, analyze_q, load_model(analyze_opt, err),
                                            threshold, relative);
            RobustnessResult r = ris(q);
            emit(analyze_opt, write_result(r, analyze_format == "json" ? ResultFormat::json
                                                                       : ResultFormat::csv),
                 out);
            err << "delta = " << r.delta << " (nominal " << r.nominal_value << ", worst case "
                << r.worst_case_value << (r.saturated ? ", saturated)" : ")") << '\n';
        } else if (sweep_cmd->parsed()) {
            if (sweep_q.eta.empty() == sweep_q.delta_threshold.empty())
                throw CLI::RequiredError("exactly one of --eta / --delta-threshold");
            bool relative = !sweep_q.eta.empty();
            std::vector<double> thresholds = parse_threshold_list(
                relative ? sweep_q.eta : sweep_q.delta_threshold,
                relative ? "--eta" : "--delta-threshold");
            RobustnessQuery q = build_query(sweep_opt, sweep_q, load_model(sweep_opt, err),
                                            thresholds.front(), relative);
            std::vector<RobustnessResult> results = sweep(q, thresholds);
            emit(sweep_opt,
                 sweep_format == "csv" ? write_results_csv(results) : write_results_json(results),
                 out);
            err << "swept " << results.size() << " thresholds\n";
        } else if (validate_cmd->parsed()) {
            if (validate_q.eta.empty() == validate_q.delta_threshold.empty())
                throw CLI::RequiredError("exactly one of --eta / --delta-threshold");
            bool relative = !validate_q.eta.empty();
            double threshold =
                std::stod(relative ? validate_q.eta : validate_q.delta_threshold);
            RobustnessQuery q = build_query(validate_opt, validate_q,
                                            load_model(validate_opt, err), threshold, relative);
            ValidationReport report = run_validation(q, validate_samples, validate_seed);
            emit(validate_opt, write_report(report), out);
            err << "delta = " << report.delta_used << ", witness eta = " << report.eta_witness
                << '\n';
        } else if (sim_cmd->parsed()) {
            auto [m, pi] = load_model(sim_opt, err);
            Horizon h = parse_horizon(sim_opt.horizon);
            if (!h.is_infinite) {
                if (sim_opt.discount >= 0.0)
                    m.discount = sim_opt.discount;
                else
                    m.discount = 1.0;
            } else {
                throw CLI::ValidationError("--horizon", "simulate requires a finite horizon");
            }
            McStats stats = monte_carlo(m, pi, sim_rollouts, h.steps, sim_seed);
            std::ostringstream json;
            json << "{\"mean_return\":" << fmt17(stats.mean)
                 << ",\"std_error\":" << fmt17(stats.std_error) << ",\"rollouts\":" << stats.rollouts
                 << ",\"seed\":" << stats.seed << ",\"visit_frequencies\":[";
            bool first = true;
            for (std::size_t s = 0; s < stats.n_states; ++s)
                for (std::size_t n = 0; n < stats.n_nodes; ++n)
                    if (stats.freq(s, n) > 0.0) {
                        if (!first) json << ',';
                        first = false;
                        json << "{\"state\":\"" << m.states[s] << "\",\"node\":\"" << pi.nodes[n]
                             << "\",\"frequency\":" << fmt17(stats.freq(s, n)) << '}';
                    }
            json << "]}\n";
            emit(sim_opt, json.str(), out);
            err << "mean return " << stats.mean << " +- " << stats.std_error << '\n';
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const ModelError& e) {
        err << "model error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace obsrobust::cli
