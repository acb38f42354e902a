#include "robas/bench.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include "robas/error.hpp"
#include "robas/parallel.hpp"

namespace robas {

std::string_view to_string(DgpKind kind) {
    switch (kind) {
    case DgpKind::BimodalGaussian: return "bimodal-gaussian";
    case DgpKind::ContaminatedGaussian: return "contaminated-gaussian";
    case DgpKind::ContaminatedExponential: return "contaminated-exponential";
    case DgpKind::PortfolioGaussian: return "portfolio-gaussian";
    }
    return "unknown";
}

DgpKind parse_dgp_kind(std::string_view name) {
    if (name == "bimodal-gaussian") return DgpKind::BimodalGaussian;
    if (name == "contaminated-gaussian") return DgpKind::ContaminatedGaussian;
    if (name == "contaminated-exponential") return DgpKind::ContaminatedExponential;
    if (name == "portfolio-gaussian") return DgpKind::PortfolioGaussian;
    throw InvalidArgument("unknown DGP '" + std::string(name) + "'");
}

DGPSpec DGPSpec::bimodal(Eigen::VectorXd theta1, Eigen::VectorXd theta2, double sigma) {
    DGPSpec s;
    s.kind = DgpKind::BimodalGaussian;
    s.center = std::move(theta1);
    s.other = std::move(theta2);
    s.sigma = sigma;
    s.validate();
    return s;
}

DGPSpec DGPSpec::contaminated_gaussian(Eigen::VectorXd theta_star, Eigen::VectorXd theta_prime, double sigma,
                                       double eta) {
    DGPSpec s;
    s.kind = DgpKind::ContaminatedGaussian;
    s.center = std::move(theta_star);
    s.other = std::move(theta_prime);
    s.sigma = sigma;
    s.eta = eta;
    s.validate();
    return s;
}

DGPSpec DGPSpec::contaminated_exponential(double rate, double outlier_mean, double outlier_sd, double eta) {
    DGPSpec s;
    s.kind = DgpKind::ContaminatedExponential;
    s.rate = rate;
    s.outlier_mean = outlier_mean;
    s.outlier_sd = outlier_sd;
    s.eta = eta;
    s.validate();
    return s;
}

DGPSpec DGPSpec::portfolio(double eta) {
    DGPSpec s;
    s.kind = DgpKind::PortfolioGaussian;
    s.center = (Eigen::VectorXd(5) << 0.05, 0.06, 0.07, 0.08, 0.10).finished();
    s.other = s.center;
    s.other.tail(3).array() -= 0.3;
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 5);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(5, 5);
    s.covariance = 0.02 * 0.02 * (I + 0.3 * (ones - I));
    s.eta = eta;
    s.validate();
    return s;
}

Eigen::Index DGPSpec::dim() const {
    return kind == DgpKind::ContaminatedExponential ? 1 : center.size();
}

void DGPSpec::validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("contamination eta must lie in [0, 1]");
    switch (kind) {
    case DgpKind::BimodalGaussian:
    case DgpKind::ContaminatedGaussian:
        if (center.size() < 1 || other.size() != center.size()) throw InvalidArgument("DGP centres must share a dimension");
        if (!(sigma > 0.0)) throw InvalidArgument("DGP sigma must be positive");
        break;
    case DgpKind::ContaminatedExponential:
        if (!(rate > 0.0)) throw InvalidArgument("exponential rate must be positive");
        if (!(outlier_sd > 0.0)) throw InvalidArgument("outlier sd must be positive");
        break;
    case DgpKind::PortfolioGaussian: {
        if (center.size() < 1 || other.size() != center.size() || covariance.rows() != center.size() ||
            covariance.cols() != center.size())
            throw InvalidArgument("portfolio DGP shapes are inconsistent");
        if (!covariance.isApprox(covariance.transpose())) throw InvalidArgument("covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(covariance);
        if (llt.info() != Eigen::Success) throw InvalidArgument("covariance must be positive definite");
        break;
    }
    }
}

Points sample_dgp(const DGPSpec& spec, Eigen::Index n, Split split, Rng& rng) {
    if (n < 1) throw InvalidArgument("sample size must be >= 1");
    spec.validate();
    const Eigen::Index D = spec.dim();
    Points out(n, D);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double eta = split == Split::Train ? spec.eta : 0.0;
    switch (spec.kind) {
    case DgpKind::BimodalGaussian:
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd& c = u(rng) < 0.5 ? spec.center : spec.other;
            for (Eigen::Index d = 0; d < D; ++d) out(i, d) = c(d) + spec.sigma * z(rng);
        }
        break;
    case DgpKind::ContaminatedGaussian:
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool outlier = u(rng) < eta;
            const Eigen::VectorXd& c = outlier ? spec.other : spec.center;
            for (Eigen::Index d = 0; d < D; ++d) out(i, d) = c(d) + spec.sigma * z(rng);
        }
        break;
    case DgpKind::ContaminatedExponential: {
        std::exponential_distribution<double> e(spec.rate);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool outlier = u(rng) < eta;
            out(i, 0) = outlier ? spec.outlier_mean + spec.outlier_sd * z(rng) : e(rng);
        }
        break;
    }
    case DgpKind::PortfolioGaussian: {
        const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(spec.covariance).matrixL();
        Eigen::VectorXd w(D);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool outlier = u(rng) < eta;
            for (Eigen::Index d = 0; d < D; ++d) w(d) = z(rng);
            out.row(i) = ((outlier ? spec.other : spec.center) + L * w).transpose();
        }
        break;
    }
    }
    return out;
}

double radius_constant(double n, double M, double alpha, double delta) {
    if (!(n >= 1.0) || !(M > 0.0) || !(alpha >= 0.0) || !(delta > 0.0 && delta < 1.0))
        throw InvalidArgument("radius constant needs n >= 1, M > 0, alpha >= 0, 0 < delta < 1");
    const double an = alpha + n;
    const double denom = an * (an + 1.0);
    const double t1 = std::sqrt(M / n);
    const double t2 = std::sqrt((2.0 * M * (n - 1.0) + alpha * (alpha + 1.0)) / denom);
    const double t3 = std::sqrt(M * alpha * (alpha + 1.0) / denom);
    const double t4 = std::sqrt(2.0 * n * M * std::log(1.0 / delta)) / an;
    return 2.0 * (t1 + t2 + t3 + t4);
}

double huber_radius(double eta, double C) {
    if (!(eta >= 0.0 && eta <= 1.0) || !(C >= 0.0)) throw InvalidArgument("huber radius needs eta in [0,1], C >= 0");
    return 4.0 * eta + 2.0 * C;
}

double CoverageReport::coverage_at(double epsilon) const {
    if (distances.empty()) return 0.0;
    std::size_t hit = 0;
    for (double d : distances)
        if (d <= epsilon) ++hit;
    return double(hit) / double(distances.size());
}

namespace {

Points clean_sample(const DGPSpec& dgp, Eigen::Index n, Rng& rng) {
    return sample_dgp(dgp, n, Split::Test, rng);
}

} // namespace

CoverageReport coverage_probe(const CoverageConfig& cfg) {
    if (cfg.reps < 1) throw InvalidArgument("coverage needs at least one repetition");
    const double C = radius_constant(double(cfg.n), cfg.M, cfg.npl.dp.alpha, cfg.delta);
    Rng ref_rng = make_stream(cfg.seed, Stream::Reference);
    const Points reference = clean_sample(cfg.dgp, cfg.reference_size, ref_rng);

    CoverageReport report;
    report.distances.resize(static_cast<std::size_t>(cfg.reps));
    report.epsilons.resize(static_cast<std::size_t>(cfg.reps));
    parallel_for(static_cast<std::size_t>(cfg.reps), cfg.threads, [&](std::size_t j) {
        const auto key = static_cast<std::uint64_t>(j);
        Rng train_rng = make_stream(cfg.seed, Stream::Train, {key});
        const Points train = sample_dgp(cfg.dgp, cfg.n, Split::Train, train_rng);
        const Bandwidth bw = median_heuristic(train);
        const std::uint64_t root = make_stream(cfg.seed, Stream::Optimizer, {key})();
        const BootstrapPosterior post = fit_predictive(train, cfg.model, with_data_prior(cfg.npl, train), bw, root);
        const ReferenceEmbedding target(WeightedMeasure::uniform(reference), bw);
        report.distances[j] = target.mmd_to(WeightedMeasure::uniform(post.predictive_pool));

        // inf_theta D_k(P_theta, P*) at a minimum-MMD fit to part of the reference.
        const Eigen::Index fit_n = std::min(cfg.inf_fit_size, reference.rows());
        const WeightedMeasure fit_target = WeightedMeasure::uniform(reference.topRows(fit_n));
        AdamConfig adam = cfg.npl.adam;
        Rng opt_rng = make_stream(root, Stream::Optimizer, {~0ull});
        const Eigen::VectorXd theta =
            minimize_mmd(fit_target, cfg.model, cfg.model.method_of_moments(fit_target.atoms()), adam, bw, opt_rng);
        Rng model_rng = make_stream(root, Stream::Predictive, {~0ull});
        const Points model_sample = cfg.model.sample(theta, cfg.inf_model_samples, model_rng);
        const double inf_term = target.mmd_to(WeightedMeasure::uniform(model_sample));
        report.epsilons[j] = C + inf_term;
    });
    std::size_t hit = 0;
    for (std::size_t j = 0; j < report.distances.size(); ++j)
        if (report.distances[j] <= report.epsilons[j]) ++hit;
    report.coverage = double(hit) / double(report.distances.size());
    return report;
}

ExpectedMmdIdentity appendix_c_identity(const std::vector<Eigen::VectorXd>& thetas, const Model& model,
                                        Eigen::Index S, const Bandwidth& bw, const WeightedMeasure& probe,
                                        Rng& rng) {
    if (thetas.empty() || S < 1) throw InvalidArgument("identity check needs B >= 1 and S >= 1");
    const auto B = static_cast<Eigen::Index>(thetas.size());
    std::vector<WeightedMeasure> parts;
    parts.reserve(thetas.size());
    Points pool(B * S, model.dim());
    for (Eigen::Index j = 0; j < B; ++j) {
        Points y = model.sample(thetas[static_cast<std::size_t>(j)], S, rng);
        pool.middleRows(j * S, S) = y;
        parts.push_back(WeightedMeasure::uniform(std::move(y)));
    }

    // Embedding route: every term from pairwise inner products.
    const double pp = embedding_inner(probe, probe, bw);
    Eigen::MatrixXd inner(B, B);
    Eigen::VectorXd cross(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        cross(j) = embedding_inner(probe, parts[static_cast<std::size_t>(j)], bw);
        for (Eigen::Index k = j; k < B; ++k) {
            inner(j, k) = embedding_inner(parts[static_cast<std::size_t>(j)], parts[static_cast<std::size_t>(k)], bw);
            inner(k, j) = inner(j, k);
        }
    }
    double lhs = 0.0;
    for (Eigen::Index j = 0; j < B; ++j) lhs += pp - 2.0 * cross(j) + inner(j, j);
    lhs /= double(B);
    const double v = inner.diagonal().mean() - inner.sum() / double(B * B);

    // Direct route: MMD^2 to the pooled predictive from its own Gram matrix.
    const WeightedMeasure pred = WeightedMeasure::uniform(pool);
    const double pred_mmd_sq = pp - 2.0 * embedding_inner(probe, pred, bw) + embedding_inner(pred, pred, bw);
    const double rhs = pred_mmd_sq + v;
    if (std::abs(lhs - rhs) > 1e-8 * (1.0 + std::abs(lhs)))
        throw InternalConsistency("expected-MMD identity violated: lhs " + std::to_string(lhs) + " rhs " +
                                  std::to_string(rhs));
    return {lhs, rhs, v, pred_mmd_sq};
}

void ExperimentConfig::validate() const {
    dgp.validate();
    if (dgp.dim() != problem.dim() || model.dim() != problem.dim())
        throw InvalidArgument("DGP, model, and problem dimensions must agree");
    if (methods.empty()) throw InvalidArgument("no methods to run");
    if (epsilon_grid.empty()) throw InvalidArgument("empty epsilon grid");
    for (double e : epsilon_grid)
        if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidArgument("epsilon values must be >= 0");
    if (n_train < 2 || T_test < 1 || J_reps < 1) throw InvalidArgument("counts must be positive (n_train >= 2)");
    if (discretization_points < 1) throw InvalidArgument("need at least one discretization point");
    if (npl.B < 1 || npl.S < 1) throw InvalidArgument("bootstrap sizes must be positive");
    npl.adam.validate();
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Task {
    int rep;
    std::size_t method_index;
};

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t nm = cfg.methods.size();
    const std::size_t ne = cfg.epsilon_grid.size();
    const auto J = static_cast<std::size_t>(cfg.J_reps);
    std::vector<Task> tasks;
    for (std::size_t k = 0; k < nm; ++k)
        for (int j = 0; j < cfg.J_reps; ++j) tasks.push_back({j, k});

    // rows indexed (method, epsilon, rep)
    std::vector<ResultRow> rows(nm * ne * J);
    parallel_for(tasks.size(), cfg.threads, [&](std::size_t t) {
        const Task task = tasks[t];
        const auto key = static_cast<std::uint64_t>(task.rep);
        const NominalKind method = cfg.methods[task.method_index];
        Rng train_rng = make_stream(cfg.seed, Stream::Train, {key});
        Rng test_rng = make_stream(cfg.seed, Stream::Test, {key});
        const Points train = sample_dgp(cfg.dgp, cfg.n_train, Split::Train, train_rng);
        const Points test = sample_dgp(cfg.dgp, cfg.T_test, Split::Test, test_rng);

        const auto t_sample = std::chrono::steady_clock::now();
        const Bandwidth bw = median_heuristic(train);
        NominalSpec nominal = NominalSpec::empirical(train);
        if (method == NominalKind::RoBAS) {
            const std::uint64_t root = make_stream(cfg.seed, Stream::Optimizer, {key})();
            BootstrapPosterior post = fit_predictive(train, cfg.model, with_data_prior(cfg.npl, train), bw, root);
            nominal = NominalSpec::robas(std::move(post.predictive_pool), train);
        }
        const double sample_time =
            method == NominalKind::RoBAS && cfg.record_timings ? seconds_since(t_sample) : 0.0;

        Rng zeta_rng = make_stream(cfg.seed, Stream::Discretization, {key, static_cast<std::uint64_t>(method)});
        const Points zeta = discretization_points(nominal, cfg.discretization_points, cfg.strategy, zeta_rng);
        DualProgram program = build_dual(nominal, zeta, cfg.epsilon_grid.front(), cfg.problem, bw);

        for (std::size_t e = 0; e < ne; ++e) {
            program.epsilon = cfg.epsilon_grid[e];
            ResultRow& row = rows[(task.method_index * ne + e) * J + static_cast<std::size_t>(task.rep)];
            row.method = method;
            row.epsilon = cfg.epsilon_grid[e];
            row.seed = task.rep;
            row.sample_time_s = sample_time;
            const auto t_solve = std::chrono::steady_clock::now();
            try {
                const DualSolution sol = solve(program, cfg.solver);
                row.solve_time_s = cfg.record_timings ? seconds_since(t_solve) : 0.0;
                row.x = sol.x;
                row.status = sol.status;
                row.ok = sol.ok;
            } catch (const Error& err) {
                row.solve_time_s = cfg.record_timings ? seconds_since(t_solve) : 0.0;
                row.x = Eigen::VectorXd::Zero(cfg.problem.dim());
                row.status = std::string("error: ") + err.what();
                row.ok = false;
            }
            row.costs.resize(static_cast<std::size_t>(cfg.T_test));
            double mean = 0.0;
            for (Eigen::Index i = 0; i < cfg.T_test; ++i) {
                const double c = row.ok ? cfg.problem.cost(row.x, test.row(i).transpose())
                                        : std::numeric_limits<double>::quiet_NaN();
                row.costs[static_cast<std::size_t>(i)] = c;
                mean += c;
            }
            mean /= double(cfg.T_test);
            double var = 0.0;
            for (double c : row.costs) var += (c - mean) * (c - mean);
            row.oos_mean = mean;
            row.oos_var = cfg.T_test > 1 ? var / double(cfg.T_test - 1) : 0.0;
        }
    });
    ExperimentResult result;
    result.summary = summarize(rows);
    result.rows = std::move(rows);
    return result;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows) {
    // Key order follows first appearance so the summary mirrors row order.
    std::vector<std::pair<NominalKind, double>> keys;
    std::map<std::pair<int, double>, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) {
        const auto k = std::make_pair(static_cast<int>(r.method), r.epsilon);
        if (!groups.count(k)) keys.emplace_back(r.method, r.epsilon);
        groups[k].push_back(&r);
    }
    std::vector<SummaryRow> out;
    for (const auto& [method, eps] : keys) {
        const auto& members = groups[{static_cast<int>(method), eps}];
        SummaryRow s{method, eps, 0.0, 0.0, 0, 0, 0.0, 0.0};
        double total = 0.0;
        std::size_t count = 0;
        for (const ResultRow* r : members) {
            s.solve_time_s += r->solve_time_s;
            s.sample_time_s += r->sample_time_s;
            if (!r->ok) {
                ++s.failures;
                continue;
            }
            ++s.count;
            for (double c : r->costs) {
                total += c;
                ++count;
            }
        }
        s.solve_time_s /= double(members.size());
        s.sample_time_s /= double(members.size());
        if (count > 0) {
            s.m = total / double(count);
            double ss = 0.0;
            for (const ResultRow* r : members)
                if (r->ok)
                    for (double c : r->costs) ss += (c - s.m) * (c - s.m);
            s.v = count > 1 ? ss / double(count - 1) : 0.0;
        } else {
            s.m = std::numeric_limits<double>::quiet_NaN();
            s.v = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(s);
    }
    return out;
}

RobustnessSample robustness_check(const RobustnessSetup& setup, std::uint64_t seed, unsigned threads) {
    const DGPSpec dgp = DGPSpec::contaminated_gaussian(Eigen::VectorXd::Constant(1, setup.clean_mean),
                                                       Eigen::VectorXd::Constant(1, setup.outlier_mean),
                                                       setup.sigma, setup.eta);
    Rng train_rng = make_stream(seed, Stream::Train);
    const Points train = sample_dgp(dgp, setup.n, Split::Train, train_rng);
    const Bandwidth bw = median_heuristic(train);
    const Model model = Model::gaussian_location(1, setup.sigma);
    const std::uint64_t root = make_stream(seed, Stream::Optimizer)();
    const BootstrapPosterior post = fit_predictive(train, model, with_data_prior(setup.npl, train), bw, root, threads);
    const WeightedMeasure pred = WeightedMeasure::uniform(post.predictive_pool);

    Rng ref_rng = make_stream(seed, Stream::Reference);
    const Points clean = sample_dgp(dgp, setup.reference_size, Split::Test, ref_rng);
    const Points patho =
        model.sample(Eigen::VectorXd::Constant(1, setup.pathological_mean), setup.reference_size, ref_rng);
    const ReferenceEmbedding clean_ref(WeightedMeasure::uniform(clean), bw);
    const ReferenceEmbedding patho_ref(WeightedMeasure::uniform(patho), bw);
    return {clean_ref.mmd_to(pred), patho_ref.mmd_to(pred)};
}

} // namespace robas
