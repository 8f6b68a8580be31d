#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "obsrobust/pomdp.hpp"
#include "obsrobust/ris.hpp"

namespace obsrobust {

/**
 * Text formats.
 *
 * POMDP (.pomdp), line oriented, '#' comments, LF or CRLF:
 *   states: s1 s2 ...
 *   actions: a1 ...
 *   observations: o1 ...
 *   discount: 0.95
 *   horizon: inf | N          (optional; default inf)
 *   start: uniform | p1 p2 ...
 *   T: a : s : s' p           (unlisted entries are 0)
 *   Z: a : s' : o p
 *   R: s : a r
 *
 * FSC (.fsc):
 *   node n1 action=a1 [initial]
 *   on o1 -> n2
 *   ...
 * Edges attach to the most recent node line; the first node is initial when
 * no node carries the marker.
 */

Pomdp parse_pomdp(const std::string& text);
std::string write_pomdp(const Pomdp& m);

struct ParsedFsc {
    Fsc fsc;
    std::vector<std::string> warnings;
};

ParsedFsc parse_fsc(const std::string& text, const Pomdp& m);
std::string write_fsc(const Fsc& pi, const Pomdp& m);

enum class BenchmarkId {
    toy_rover,
    rover_nav,
    cancer,
    part_qc_policy1,
    part_qc_policy2,
    tiger,
    baby,
};

const std::vector<std::string>& benchmark_names();
BenchmarkId benchmark_from_name(const std::string& name);
std::string benchmark_name(BenchmarkId id);

/// The benchmark model/policy pairs used throughout the test studies.
std::pair<Pomdp, Fsc> builtin(BenchmarkId id);

enum class ResultFormat { json, csv };

/// JSON encoding of an analysis result with stable key order (delta,
/// nominal_value, worst_case_value, variant, iterations, witness, ...);
/// numeric fields carry 17 significant digits so values round-trip exactly.
std::string write_result(const RobustnessResult& r, ResultFormat fmt);

/// CSV rows (threshold, delta, nominal_value, worst_case_value) for a sweep.
std::string write_results_csv(const std::vector<RobustnessResult>& results);
std::string write_results_json(const std::vector<RobustnessResult>& results);

RobustnessResult parse_result(const std::string& json_text);

bool results_equal(const RobustnessResult& a, const RobustnessResult& b);

struct ValidationReport {
    double target_eta = 0.0;
    double delta_used = 0.0;
    double eta_witness = 0.0;
    std::optional<double> eta_sampled_ns;  // absent for sticky-variant reports
    double eta_sampled_s = 0.0;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

std::string write_report(const ValidationReport& r);

}  // namespace obsrobust
