#include <gtest/gtest.h>

#include <random>

#include "robas/dro.hpp"
#include "robas/error.hpp"

using namespace robas;

namespace {

Points column(std::initializer_list<double> v) {
    Points p(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) p(i++, 0) = x;
    return p;
}

Points normal_points(Eigen::Index n, Eigen::Index d, double mean, double sd, Rng& rng) {
    std::normal_distribution<double> z(mean, sd);
    Points p(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) p(i, k) = z(rng);
    return p;
}

// Brute-force min over an x-grid of the sample-average newsvendor cost.
double newsvendor_saa_oracle(const Points& xi, double b, double h) {
    double best = std::numeric_limits<double>::infinity();
    const double lo = xi.minCoeff(), hi = xi.maxCoeff();
    for (int k = 0; k <= 20000; ++k) {
        const double x = std::max(0.0, lo + (hi - lo) * k / 20000.0);
        double total = 0.0;
        for (Eigen::Index i = 0; i < xi.rows(); ++i)
            total += h * std::max(x - xi(i, 0), 0.0) + b * std::max(xi(i, 0) - x, 0.0);
        best = std::min(best, total / double(xi.rows()));
    }
    return best;
}

DualProgram small_program(Rng& rng, double eps, Eigen::Index N = 30, Eigen::Index m = 25) {
    const Points data = normal_points(N, 1, 25.0, 5.0, rng);
    const NominalSpec nominal = NominalSpec::empirical(data);
    const Points zeta = discretization_points(nominal, m, DiscretizationStrategy::Grid, rng);
    return build_dual(nominal, zeta, eps, Problem::newsvendor(1), median_heuristic(data));
}

} // namespace

TEST(Discretization, GridSpansPaddedRange) {
    const NominalSpec nominal = NominalSpec::empirical(column({0.0, 40.0, 100.0}));
    Rng rng(1);
    const Points z = discretization_points(nominal, 5, DiscretizationStrategy::Grid, rng);
    const double expected[] = {-25.0, 12.5, 50.0, 87.5, 125.0};
    for (int j = 0; j < 5; ++j) EXPECT_NEAR(z(j, 0), expected[j], 1e-12);
}

TEST(Discretization, GridRejectsMultivariate) {
    Rng rng(1);
    const NominalSpec nominal = NominalSpec::empirical(normal_points(5, 2, 0, 1, rng));
    EXPECT_THROW(discretization_points(nominal, 5, DiscretizationStrategy::Grid, rng), InvalidArgument);
}

TEST(Discretization, ResampleCoversPoolWhenLarge) {
    Rng rng(2);
    const Points pool = normal_points(10, 2, 0, 1, rng);
    const NominalSpec nominal = NominalSpec::empirical(pool);
    const Points z = discretization_points(nominal, 15, DiscretizationStrategy::Resample, rng);
    for (Eigen::Index i = 0; i < pool.rows(); ++i) {
        bool found = false;
        for (Eigen::Index j = 0; j < z.rows(); ++j) found = found || z.row(j) == pool.row(i);
        EXPECT_TRUE(found) << "pool point " << i;
    }
}

TEST(BuildDual, CountsRepresenterCoefficients) {
    Rng rng(3);
    const Points pool = normal_points(900, 1, 25.0, 5.0, rng);
    const Points data = normal_points(20, 1, 25.0, 5.0, rng);
    const NominalSpec nominal = NominalSpec::robas(pool, data);
    const Points zeta = discretization_points(nominal, 200, DiscretizationStrategy::Grid, rng);
    const DualProgram prog = build_dual(nominal, zeta, 0.1, Problem::newsvendor(1), median_heuristic(pool));
    EXPECT_EQ(prog.num_points(), 1100);
    EXPECT_EQ(prog.n_nominal, 900);
}

TEST(BuildDual, NewsvendorConstraintAndConeCounts) {
    Rng rng(4);
    // 200 constraint points: 100 nominal plus 100 fresh grid points.
    const Points data = normal_points(100, 1, 25.0, 5.0, rng);
    const NominalSpec nominal = NominalSpec::empirical(data);
    const Points zeta = discretization_points(nominal, 100, DiscretizationStrategy::Grid, rng);
    DualProgram prog = build_dual(nominal, zeta, 0.1, Problem::newsvendor(1), median_heuristic(data));
    ASSERT_EQ(prog.num_points(), 200);
    EXPECT_EQ(prog.sip_constraint_count(), 400);
    EXPECT_EQ(prog.cone_count(), 1);
    prog.epsilon = 0.0;
    EXPECT_EQ(prog.cone_count(), 0);
}

TEST(BuildDual, DeduplicatesAgainstNominal) {
    const Points data = column({1.0, 2.0, 3.0});
    const Points zeta = column({2.0, 4.0, 4.0, 5.0});
    const DualProgram prog =
        build_dual(NominalSpec::empirical(data), zeta, 0.1, Problem::newsvendor(1), Bandwidth(1.0));
    EXPECT_EQ(prog.num_points(), 5);
}

TEST(BuildDual, RejectsNegativeRadius) {
    const Points data = column({1.0, 2.0, 3.0});
    EXPECT_THROW(build_dual(NominalSpec::empirical(data), data, -0.1, Problem::newsvendor(1), Bandwidth(1.0)),
                 InvalidArgument);
}

TEST(BuildDual, EmpiricalBaselineUsesRawData) {
    Rng rng(5);
    const Points data = normal_points(12, 1, 0.0, 1.0, rng);
    const DualProgram prog =
        build_dual(NominalSpec::empirical(data), Points(0, 1), 0.1, Problem::newsvendor(1), median_heuristic(data));
    EXPECT_TRUE(prog.all_points.topRows(prog.n_nominal) == data);
}

TEST(PivotedCholesky, ReproducesGramMatrix) {
    Rng rng(6);
    const Points pts = normal_points(60, 2, 0.0, 1.0, rng);
    const Eigen::MatrixXd K = gram(pts, pts, Bandwidth(0.7));
    const PivotedCholesky f = pivoted_cholesky(K, 1e-12);
    EXPECT_LT((f.L * f.L.transpose() - K).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Solve, PortfolioAtZeroRadiusPicksBestAsset) {
    Rng rng(7);
    Points xi = normal_points(40, 3, 0.0, 0.01, rng);
    xi.col(0).array() += 0.2;
    const Eigen::RowVectorXd mean = xi.colwise().mean();
    const DualProgram prog =
        build_dual(NominalSpec::empirical(xi), Points(0, 3), 0.0, Problem::portfolio(3), median_heuristic(xi));
    const DualSolution sol = solve(prog);
    ASSERT_TRUE(sol.ok);
    EXPECT_NEAR(sol.x(0), 1.0, 1e-6);
    EXPECT_NEAR(sol.x.sum(), 1.0, 1e-12);
    EXPECT_NEAR(sol.objective, -mean(0), 1e-6);
}

TEST(Solve, NewsvendorZeroRadiusMatchesBruteForce) {
    Rng rng(8);
    for (int rep = 0; rep < 5; ++rep) {
        const Points data = normal_points(30, 1, 25.0, 5.0, rng);
        const NominalSpec nominal = NominalSpec::empirical(data);
        const Points zeta = discretization_points(nominal, 200, DiscretizationStrategy::Grid, rng);
        const DualProgram prog = build_dual(nominal, zeta, 0.0, Problem::newsvendor(1), median_heuristic(data));
        const DualSolution sol = solve(prog);
        ASSERT_TRUE(sol.ok);
        const double oracle = newsvendor_saa_oracle(data, 8.0, 3.0);
        EXPECT_LE(std::abs(sol.objective - oracle), 0.02 * oracle) << sol.objective << " vs " << oracle;
    }
}

TEST(Solve, SolutionInvariants) {
    Rng rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        const DualProgram prog = small_program(rng, 0.05 + 0.05 * rep);
        const DualSolution sol = solve(prog);
        ASSERT_TRUE(sol.ok);
        EXPECT_EQ(sol.status, "optimal");
        EXPECT_LE(sol.primal_residual, 1e-6);
        EXPECT_LE(sol.dual_residual, 1e-6);
        EXPECT_LE(sol.gap_residual, 1e-6);
        EXPECT_LE(sol.feasibility_residual, 1e-6);
        // weak-duality floor
        EXPECT_GE(sol.objective, prog.saa_cost(sol.x) - 1e-8);
        // norm consistency
        const double quad = sol.coeffs.dot(prog.gram * sol.coeffs);
        EXPECT_NEAR(sol.rkhs_norm, std::sqrt(std::max(quad, 0.0)), 1e-8 * (1.0 + sol.rkhs_norm));
        // reported objective
        double mean_g = 0.0;
        for (Eigen::Index i = 0; i < prog.n_nominal; ++i) mean_g += evaluate_g(sol, prog, prog.all_points.row(i));
        mean_g /= double(prog.n_nominal);
        EXPECT_NEAR(sol.objective, sol.g0 + mean_g + prog.epsilon * sol.rkhs_norm, 1e-8 * (1.0 + std::abs(sol.objective)));
        for (Eigen::Index j = 0; j < prog.num_points(); ++j)
            EXPECT_GE(sol.g0 + evaluate_g(sol, prog, prog.all_points.row(j)),
                      prog.problem.cost(sol.x, prog.all_points.row(j).transpose()) - 1e-6);
    }
}

TEST(Solve, ObjectiveNondecreasingInRadius) {
    Rng rng(10);
    for (int rep = 0; rep < 5; ++rep) {
        DualProgram prog = small_program(rng, 0.0);
        double prev = -std::numeric_limits<double>::infinity();
        for (double eps : {0.0, 0.02, 0.05, 0.1, 0.2, 0.5}) {
            prog.epsilon = eps;
            const DualSolution sol = solve(prog);
            ASSERT_TRUE(sol.ok);
            EXPECT_GE(sol.objective, prev - 1e-7 * (1.0 + std::abs(prev)));
            prev = sol.objective;
        }
    }
}

TEST(Solve, MultivariateNewsvendorUsesPerCoordinateGroups) {
    Rng rng(11);
    const Points data = normal_points(25, 3, 20.0, 4.0, rng);
    const NominalSpec nominal = NominalSpec::empirical(data);
    const Points zeta = discretization_points(nominal, 20, DiscretizationStrategy::Resample, rng);
    DualProgram prog = build_dual(nominal, zeta, 0.0, Problem::newsvendor(3), median_heuristic(data));
    const DualSolution sol = solve(prog);
    ASSERT_TRUE(sol.ok);
    EXPECT_LE(sol.feasibility_residual, 1e-6);
    EXPECT_GE(sol.objective, prog.saa_cost(sol.x) - 1e-8);
    EXPECT_TRUE((sol.x.array() >= 0.0).all());
}

TEST(Solve, SubgradientFallbackProducesFeasibleDecision) {
    Rng rng(12);
    const DualProgram prog = small_program(rng, 0.1);
    DroSolverConfig cfg;
    cfg.ipm.max_iter = 0;
    cfg.ipm.accept_tol = 0.0;
    const DualSolution sub = solve(prog, cfg);
    ASSERT_TRUE(sub.ok);
    EXPECT_EQ(sub.status, "subgradient");
    EXPECT_LE(sub.feasibility_residual, 1e-9);
    const DualSolution ipm = solve(prog);
    EXPECT_GE(sub.objective, ipm.objective - 1e-6);
    EXPECT_LE(sub.objective, ipm.objective * 1.05 + 1e-6);

    cfg.subgradient_fallback = false;
    const DualSolution none = solve(prog, cfg);
    EXPECT_FALSE(none.ok);
}

TEST(EvaluateG, KernelExpansion) {
    Rng rng(13);
    const DualProgram prog = small_program(rng, 0.1, 5, 3);
    DualSolution sol;
    sol.coeffs = Eigen::VectorXd::Zero(prog.num_points());
    const Eigen::RowVectorXd probe = Eigen::RowVectorXd::Constant(1, 23.0);
    EXPECT_EQ(evaluate_g(sol, prog, probe), 0.0);
    sol.coeffs(2) = 1.0;
    EXPECT_DOUBLE_EQ(evaluate_g(sol, prog, probe), kernel_eval(prog.all_points.row(2), probe, prog.bandwidth));
}

TEST(Certificate, NominalProbeHasNonnegativeMargin) {
    Rng rng(14);
    const DualProgram prog = small_program(rng, 0.5);
    const DualSolution sol = solve(prog);
    const WeightedMeasure nominal = WeightedMeasure::uniform(prog.all_points.topRows(prog.n_nominal));
    const CertificateReport rep = worst_case_certificate(sol, prog, nominal);
    EXPECT_GE(rep.margin, -1e-6);
    EXPECT_NEAR(rep.probe_distance, 0.0, 1e-6);
}

TEST(Certificate, RandomInBallProbesRespectWeakDuality) {
    Rng rng(15);
    const DualProgram prog = small_program(rng, 0.3);
    const DualSolution sol = solve(prog);
    ASSERT_TRUE(sol.ok);
    const Eigen::Index P = prog.num_points();
    const Eigen::Index N = prog.n_nominal;
    std::gamma_distribution<double> gam(1.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int accepted = 0;
    for (int attempt = 0; accepted < 100 && attempt < 100000; ++attempt) {
        // Mix the nominal weights with a random reweighting, shrinking until inside the ball.
        Eigen::VectorXd w(P);
        for (Eigen::Index j = 0; j < P; ++j) w(j) = gam(rng);
        w /= w.sum();
        Eigen::VectorXd nominal_w = Eigen::VectorXd::Zero(P);
        nominal_w.head(N).setConstant(1.0 / double(N));
        double lam = u(rng);
        for (int shrink = 0; shrink < 60; ++shrink, lam *= 0.5) {
            const WeightedMeasure probe(prog.all_points, (1.0 - lam) * nominal_w + lam * w);
            const WeightedMeasure nominal = WeightedMeasure::uniform(prog.all_points.topRows(N));
            if (mmd(probe, nominal, prog.bandwidth) <= prog.epsilon) {
                const CertificateReport rep = worst_case_certificate(sol, prog, probe);
                EXPECT_GE(rep.margin, -1e-6);
                ++accepted;
                break;
            }
        }
    }
    EXPECT_EQ(accepted, 100);
}

TEST(Certificate, RejectsProbeOutsideBall) {
    Rng rng(16);
    const DualProgram prog = small_program(rng, 0.01);
    const DualSolution sol = solve(prog);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(prog.num_points());
    w(prog.num_points() - 1) = 1.0;
    EXPECT_THROW(worst_case_certificate(sol, prog, WeightedMeasure(prog.all_points, w)), InvalidArgument);
}

TEST(Certificate, RejectsProbeOffSupport) {
    Rng rng(17);
    const DualProgram prog = small_program(rng, 0.5);
    const DualSolution sol = solve(prog);
    EXPECT_THROW(worst_case_certificate(sol, prog, WeightedMeasure::uniform(column({1234.5}))), InvalidArgument);
}
