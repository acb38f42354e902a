// File formats: headerless data CSV, results CSV, JSON configs and solutions.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robas/bench.hpp"
#include "robas/dro.hpp"
#include "robas/kernel.hpp"

namespace robas {

using Json = nlohmann::ordered_json;

/// One observation per line, one column per dimension. Blank lines are
/// skipped; anything else that is not a finite number throws ParseError.
Points parse_points_csv(std::istream& in);
Points read_points_csv(const std::string& path);

inline const char* results_header = "method,epsilon,seed,oos_mean,oos_var,solve_time_s,sample_time_s,status";

/// A line of the results file. Summary lines carry no seed and status
/// "summary"; their oos_mean/oos_var are the pooled m and v.
struct ResultRecord {
    std::string method;
    double epsilon;
    std::optional<int> seed;
    double oos_mean;
    double oos_var;
    double solve_time_s;
    double sample_time_s;
    std::string status;
};

/// Per (method, epsilon): the repetition rows in seed order, then one summary
/// line. Reals are written with 17 significant digits.
void write_results_csv(std::ostream& out, const ExperimentResult& result);
std::vector<ResultRecord> parse_results_csv(std::istream& in);

std::string format_real(double v);

/// Unknown keys or wrongly typed values throw InvalidArgument.
ExperimentConfig experiment_config_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);
Json to_json(const NplConfig& cfg);
Json to_json(const Problem& problem);
Json to_json(const Model& model);
Json to_json(const DGPSpec& dgp);
Json to_json(const DroSolverConfig& cfg);

/// Parses text as JSON; syntax errors throw ParseError.
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);

/// ROBAS_SEED, if set, replaces `fallback`. A malformed value throws
/// InvalidArgument.
std::uint64_t seed_from_env(std::uint64_t fallback);

} // namespace robas
