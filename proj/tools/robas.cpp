// robas: solve, experiment, calibrate, diagnose.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "robas/bench.hpp"
#include "robas/dro.hpp"
#include "robas/error.hpp"
#include "robas/io.hpp"
#include "robas/npl.hpp"

using namespace robas;

namespace {

enum Exit { Ok = 0, ParseFailure = 1, SolveFailure = 2, ConfigFailure = 3 };

unsigned default_threads() {
    return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<double> as_vector(const Eigen::VectorXd& v) {
    return {v.data(), v.data() + v.size()};
}

void emit(const Json& doc, const std::string& path) {
    const std::string text = doc.dump(2) + "\n";
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path);
    out << text;
}

struct ModelOptions {
    std::string kind = "gaussian-location";
    std::optional<double> sigma;
    int B = 30;
    Eigen::Index S = 30;
    double alpha = 0.0;
    Eigen::Index tau = 100;
    double lr = 0.1;
    int steps = 300;
    Eigen::Index batch = 50;

    void attach(CLI::App& app) {
        app.add_option("--model", kind, "gaussian-location, gaussian-meancov or exponential")->capture_default_str();
        app.add_option("--sigma", sigma, "known sd of the location model (default: sample sd)");
        app.add_option("--B", B, "posterior bootstrap draws")->capture_default_str();
        app.add_option("--S", S, "predictive samples per draw")->capture_default_str();
        app.add_option("--alpha", alpha, "Dirichlet process concentration")->capture_default_str();
        app.add_option("--tau", tau, "prior truncation")->capture_default_str();
        app.add_option("--lr", lr, "Adam learning rate")->capture_default_str();
        app.add_option("--steps", steps, "Adam steps")->capture_default_str();
        app.add_option("--batch", batch, "model samples per Adam step")->capture_default_str();
    }

    Model model(const Points& data) const {
        const Eigen::Index D = data.cols();
        switch (parse_model_kind(kind)) {
        case ModelKind::GaussianLocation: {
            double sd = 0.0;
            if (sigma) {
                sd = *sigma;
            } else {
                const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
                sd = data.rows() > 1 ? std::sqrt(centered.squaredNorm() / double(D * (data.rows() - 1))) : 0.0;
                if (!(sd > 0.0)) throw InvalidArgument("cannot infer --sigma from constant data");
            }
            return Model::gaussian_location(D, sd);
        }
        case ModelKind::GaussianMeanCov: return Model::gaussian_mean_cov(D);
        case ModelKind::ExponentialRate: return Model::exponential_rate(D);
        }
        throw InvalidArgument("unknown model " + kind);
    }

    NplConfig npl() const {
        if (B < 1 || S < 1) throw InvalidArgument("--B and --S must be positive");
        if (!(alpha >= 0.0)) throw InvalidArgument("--alpha must be >= 0");
        NplConfig c;
        c.B = B;
        c.S = S;
        c.dp.alpha = alpha;
        c.dp.tau = tau;
        c.adam.learning_rate = lr;
        c.adam.steps = steps;
        c.adam.model_batch = batch;
        c.adam.validate();
        return c;
    }
};

BootstrapPosterior fit(const Points& data, const Model& model, const NplConfig& npl, std::uint64_t seed,
                       unsigned threads) {
    const Bandwidth bw = median_heuristic(data);
    const std::uint64_t root = make_stream(seed, Stream::Optimizer)();
    return fit_predictive(data, model, with_data_prior(npl, data), bw, root, threads);
}

// ---- solve ----

struct SolveArgs {
    std::string data;
    std::string problem = "newsvendor";
    std::string method = "robas";
    double epsilon = 0.1;
    std::uint64_t seed = 0;
    Eigen::Index m = 200;
    std::string strategy = "auto";
    double b = 8.0, h = 3.0;
    unsigned threads = default_threads();
    std::string out;
    ModelOptions model;
};

int run_solve(const SolveArgs& a) {
    if (!(a.epsilon >= 0.0) || !std::isfinite(a.epsilon)) throw InvalidArgument("--epsilon must be >= 0");
    if (a.m < 1) throw InvalidArgument("--m must be positive");
    if (a.threads < 1) throw InvalidArgument("--threads must be positive");
    const NominalKind method = parse_nominal_kind(a.method);
    const DiscretizationStrategy strategy = parse_strategy(a.strategy);
    const std::uint64_t seed = seed_from_env(a.seed);
    const NplConfig npl = a.model.npl();

    const Points data = read_points_csv(a.data);
    const Eigen::Index D = data.cols();
    const Problem problem = parse_problem_kind(a.problem) == ProblemKind::Newsvendor ? Problem::newsvendor(D, a.b, a.h)
                                                                                       : Problem::portfolio(D);
    const Bandwidth bw = median_heuristic(data);

    Json effective;
    effective["data"] = a.data;
    effective["problem"] = to_json(problem);
    effective["method"] = to_string(method);
    effective["epsilon"] = a.epsilon;
    effective["seed"] = seed;
    effective["m"] = a.m;
    effective["strategy"] = to_string(strategy);
    effective["threads"] = a.threads;

    NominalSpec nominal = NominalSpec::empirical(data);
    if (method == NominalKind::RoBAS) {
        const Model model = a.model.model(data);
        effective["model"] = to_json(model);
        effective["npl"] = to_json(npl);
        BootstrapPosterior post = fit(data, model, npl, seed, a.threads);
        nominal = NominalSpec::robas(std::move(post.predictive_pool), data);
    }
    Rng zeta_rng = make_stream(seed, Stream::Discretization);
    const Points zeta = discretization_points(nominal, a.m, strategy, zeta_rng);
    const DualProgram program = build_dual(nominal, zeta, a.epsilon, problem, bw);
    const DroSolverConfig solver;
    effective["solver"] = to_json(solver);
    const DualSolution sol = solve(program, solver);

    Json doc;
    doc["status"] = sol.status;
    doc["x"] = as_vector(sol.x);
    doc["objective"] = sol.objective;
    doc["g0"] = sol.g0;
    doc["rkhs_norm"] = sol.rkhs_norm;
    doc["coefficients"] = program.num_points();
    doc["nominal_points"] = program.n_nominal;
    doc["rank"] = program.factor.rank();
    doc["saa_cost"] = program.saa_cost(sol.x);
    doc["iterations"] = sol.iterations;
    doc["residuals"] = {{"primal", sol.primal_residual},
                        {"dual", sol.dual_residual},
                        {"gap", sol.gap_residual},
                        {"feasibility", sol.feasibility_residual}};
    doc["bandwidth"] = bw.ell();
    doc["config"] = effective;
    emit(doc, a.out);
    if (!sol.ok) {
        std::cerr << "robas: solver failed (" << sol.status << ")\n";
        return SolveFailure;
    }
    return Ok;
}

// ---- experiment ----

struct ExperimentArgs {
    std::string config;
    std::string out;
    std::optional<unsigned> threads;
    bool no_timings = false;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    ExperimentConfig cfg = experiment_config_from_json(read_json_file(a.config));
    cfg.seed = seed_from_env(cfg.seed);
    if (a.threads) cfg.threads = *a.threads;
    if (cfg.threads < 1) throw InvalidArgument("--threads must be positive");
    if (a.no_timings) cfg.record_timings = false;
    const ExperimentResult result = run_experiment(cfg);

    std::ostringstream csv;
    write_results_csv(csv, result);
    if (a.out.empty() || a.out == "-") {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out, std::ios::binary);
        if (!out) throw InvalidArgument("cannot write " + a.out);
        out << csv.str();
        std::ofstream cfg_out(a.out + ".config.json", std::ios::binary);
        cfg_out << to_json(cfg).dump(2) << "\n";
    }
    std::size_t failures = 0;
    for (const auto& s : result.summary) failures += s.failures;
    if (failures > 0) std::cerr << "robas: " << failures << " solves failed; excluded from the summary rows\n";
    return Ok;
}

// ---- calibrate ----

struct CalibrateArgs {
    double n = 20, M = 1.0, alpha = 0.0, delta = 0.05;
    std::optional<double> eta;
    bool json = false;
};

int run_calibrate(const CalibrateArgs& a) {
    const double C = radius_constant(a.n, a.M, a.alpha, a.delta);
    std::optional<double> huber;
    if (a.eta) huber = huber_radius(*a.eta, C);
    if (a.json) {
        Json doc;
        doc["n"] = a.n;
        doc["M"] = a.M;
        doc["alpha"] = a.alpha;
        doc["delta"] = a.delta;
        doc["C"] = C;
        if (huber) {
            doc["eta"] = *a.eta;
            doc["huber_radius"] = *huber;
        }
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "C = " << format_real(C) << "\n";
        if (huber) std::cout << "huber_radius = " << format_real(*huber) << "\n";
    }
    return Ok;
}

// ---- diagnose ----

struct DiagnoseArgs {
    std::string data;
    std::string reference;
    std::vector<double> grid_mu;     // lo hi count
    std::vector<double> grid_sigma;  // lo hi count
    Eigen::Index grid_samples = 1000;
    std::uint64_t seed = 0;
    unsigned threads = default_threads();
    std::string out;
    ModelOptions model;
};

std::vector<double> linspace(const std::vector<double>& spec, const char* flag) {
    if (spec.size() != 3 || spec[2] < 1 || spec[2] != std::floor(spec[2]) || !(spec[0] <= spec[1]))
        throw InvalidArgument(std::string(flag) + " takes LO HI COUNT with LO <= HI and COUNT >= 1");
    const int n = static_cast<int>(spec[2]);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? spec[0] : spec[0] + (spec[1] - spec[0]) * i / double(n - 1);
    return v;
}

int run_diagnose(const DiagnoseArgs& a) {
    if (a.threads < 1) throw InvalidArgument("--threads must be positive");
    const std::uint64_t seed = seed_from_env(a.seed);
    const NplConfig npl = a.model.npl();
    std::vector<double> mus, sigmas;
    const bool grid = !a.grid_mu.empty() || !a.grid_sigma.empty();
    if (grid) {
        mus = linspace(a.grid_mu, "--grid-mu");
        sigmas = linspace(a.grid_sigma, "--grid-sigma");
        if (sigmas.front() <= 0.0) throw InvalidArgument("--grid-sigma values must be positive");
        if (a.grid_samples < 1) throw InvalidArgument("--grid-samples must be positive");
    }

    const Points data = read_points_csv(a.data);
    std::optional<Points> reference;
    if (!a.reference.empty()) {
        reference = read_points_csv(a.reference);
        if (reference->cols() != data.cols()) throw InvalidArgument("reference dimension differs from data");
    }
    const Model model = a.model.model(data);
    const BootstrapPosterior post = fit(data, model, npl, seed, a.threads);
    const WeightedMeasure pool = WeightedMeasure::uniform(post.predictive_pool);

    Json doc;
    doc["bandwidth"] = post.bandwidth.ell();
    doc["n"] = data.rows();
    doc["pool_size"] = post.predictive_pool.rows();
    doc["mmd_to_data"] = mmd(pool, WeightedMeasure::uniform(data), post.bandwidth);
    if (reference) doc["mmd_to_reference"] = mmd(pool, WeightedMeasure::uniform(*reference), post.bandwidth);

    const auto s = static_cast<Eigen::Index>(post.thetas.front().size());
    Eigen::MatrixXd thetas(static_cast<Eigen::Index>(post.thetas.size()), s);
    for (std::size_t j = 0; j < post.thetas.size(); ++j) thetas.row(static_cast<Eigen::Index>(j)) = post.thetas[j];
    const Eigen::RowVectorXd mean = thetas.colwise().mean();
    const Eigen::MatrixXd centered = thetas.rowwise() - mean;
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(s);
    if (thetas.rows() > 1) sd = (centered.colwise().squaredNorm() / double(thetas.rows() - 1)).cwiseSqrt();
    doc["theta"] = {{"mean", as_vector(mean.transpose())},
                    {"sd", as_vector(sd)},
                    {"min", as_vector(thetas.colwise().minCoeff().transpose())},
                    {"max", as_vector(thetas.colwise().maxCoeff().transpose())}};

    if (grid) {
        // MMD from N(mu 1, sigma^2 I) to the predictive pool, sharing one noise draw.
        Rng noise_rng = make_stream(seed, Stream::Probe);
        std::normal_distribution<double> z;
        Points noise(a.grid_samples, data.cols());
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = z(noise_rng);
        const ReferenceEmbedding nominal(pool, post.bandwidth);
        Json rows = Json::array();
        for (double mu : mus)
            for (double sigma : sigmas) {
                const Points sample = (noise * sigma).array() + mu;
                rows.push_back({{"mu", mu}, {"sigma", sigma}, {"mmd", nominal.mmd_to(WeightedMeasure::uniform(sample))}});
            }
        doc["grid"] = rows;
    }
    Json cfg;
    cfg["data"] = a.data;
    cfg["reference"] = a.reference;
    cfg["model"] = to_json(model);
    cfg["npl"] = to_json(npl);
    cfg["seed"] = seed;
    cfg["threads"] = a.threads;
    if (grid) cfg["grid_samples"] = a.grid_samples;
    doc["config"] = cfg;
    emit(doc, a.out);
    return Ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributionally robust optimisation over MMD balls around an NPL posterior predictive"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve_cmd = app.add_subcommand("solve", "solve one worst-case risk problem");
    solve_cmd->set_help_flag("--help", "print this help message and exit");  // -h is the holding cost
    solve_cmd->add_option("data", solve_args.data, "headerless CSV, one observation per row")->required();
    solve_cmd->add_option("--problem", solve_args.problem, "newsvendor or portfolio")->capture_default_str();
    solve_cmd->add_option("--method", solve_args.method, "robas or empirical-mmd")->capture_default_str();
    solve_cmd->add_option("--epsilon", solve_args.epsilon, "ball radius")->capture_default_str();
    solve_cmd->add_option("--seed", solve_args.seed, "root seed (ROBAS_SEED overrides)")->capture_default_str();
    solve_cmd->add_option("--m", solve_args.m, "discretization points")->capture_default_str();
    solve_cmd->add_option("--strategy", solve_args.strategy, "auto, grid or resample")->capture_default_str();
    solve_cmd->add_option("--b", solve_args.b, "newsvendor backorder cost")->capture_default_str();
    solve_cmd->add_option("--h", solve_args.h, "newsvendor holding cost")->capture_default_str();
    solve_cmd->add_option("--threads", solve_args.threads, "worker threads")->capture_default_str();
    solve_cmd->add_option("--out", solve_args.out, "output JSON path (default stdout)");
    solve_args.model.attach(*solve_cmd);

    ExperimentArgs exp_args;
    auto* exp_cmd = app.add_subcommand("experiment", "run an out-of-sample experiment");
    exp_cmd->add_option("config", exp_args.config, "experiment config JSON")->required();
    exp_cmd->add_option("--out", exp_args.out, "results CSV path (default stdout)");
    exp_cmd->add_option("--threads", exp_args.threads, "worker threads (overrides the config)");
    exp_cmd->add_flag("--no-timings", exp_args.no_timings, "write zero timings for byte-identical reruns");

    CalibrateArgs cal_args;
    auto* cal_cmd = app.add_subcommand("calibrate", "print the radius constant and Huber bound");
    cal_cmd->add_option("--n", cal_args.n, "sample size")->capture_default_str();
    cal_cmd->add_option("--M", cal_args.M, "kernel bound")->capture_default_str();
    cal_cmd->add_option("--alpha", cal_args.alpha, "Dirichlet process concentration")->capture_default_str();
    cal_cmd->add_option("--delta", cal_args.delta, "failure probability")->capture_default_str();
    cal_cmd->add_option("--eta", cal_args.eta, "contamination level");
    cal_cmd->add_flag("--json", cal_args.json, "machine-readable output");

    DiagnoseArgs diag_args;
    auto* diag_cmd = app.add_subcommand("diagnose", "MMD diagnostics of the posterior predictive");
    diag_cmd->add_option("data", diag_args.data, "headerless CSV, one observation per row")->required();
    diag_cmd->add_option("--reference", diag_args.reference, "reference sample CSV");
    diag_cmd->add_option("--grid-mu", diag_args.grid_mu, "LO HI COUNT")->expected(3);
    diag_cmd->add_option("--grid-sigma", diag_args.grid_sigma, "LO HI COUNT")->expected(3);
    diag_cmd->add_option("--grid-samples", diag_args.grid_samples, "samples per grid point")->capture_default_str();
    diag_cmd->add_option("--seed", diag_args.seed, "root seed (ROBAS_SEED overrides)")->capture_default_str();
    diag_cmd->add_option("--threads", diag_args.threads, "worker threads")->capture_default_str();
    diag_cmd->add_option("--out", diag_args.out, "output JSON path (default stdout)");
    diag_args.model.attach(*diag_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return ConfigFailure;
    }

    try {
        if (*solve_cmd) return run_solve(solve_args);
        if (*exp_cmd) return run_experiment_cmd(exp_args);
        if (*cal_cmd) return run_calibrate(cal_args);
        if (*diag_cmd) return run_diagnose(diag_args);
    } catch (const ParseError& e) {
        std::cerr << "robas: " << e.what() << "\n";
        return ParseFailure;
    } catch (const SolverFailure& e) {
        std::cerr << "robas: " << e.what() << "\n";
        return SolveFailure;
    } catch (const InvalidArgument& e) {
        std::cerr << "robas: " << e.what() << "\n";
        return ConfigFailure;
    } catch (const DegenerateData& e) {
        std::cerr << "robas: " << e.what() << "\n";
        return ConfigFailure;
    } catch (const Error& e) {
        std::cerr << "robas: " << e.what() << "\n";
        return SolveFailure;
    }
    return ConfigFailure;
}
