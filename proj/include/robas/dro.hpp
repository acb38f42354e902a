// Worst-case expected cost over an MMD ball around a discrete nominal
// measure, solved through its kernel dual:
//
//     min_{x, g0, g}  g0 + (1/N) sum_i g(xi_i) + eps ||g||_k
//     s.t.            f(x, p) <= g0 + g(p)   for every constraint point p,
//
// with g = sum_p alpha_p k(p, .) over the nominal and discretization points.
// Writing K = L L^T (pivoted Cholesky) and beta = L^T alpha turns the
// problem into a linear program plus one second-order cone.
#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "robas/kernel.hpp"
#include "robas/problems.hpp"
#include "robas/random.hpp"
#include "robas/socp.hpp"

namespace robas {

enum class NominalKind { RoBAS, EmpiricalMMD };

std::string_view to_string(NominalKind kind);
NominalKind parse_nominal_kind(std::string_view name);

/// Centre of the ambiguity set: uniform weights on `points`. `data` holds the
/// raw observations (equal to `points` for the empirical baseline).
struct NominalSpec {
    NominalKind kind;
    Points points;
    Points data;

    static NominalSpec robas(Points predictive_pool, Points data);
    static NominalSpec empirical(Points data);

    WeightedMeasure measure() const { return WeightedMeasure::uniform(points); }
};

enum class DiscretizationStrategy { Auto, Grid, Resample };

std::string_view to_string(DiscretizationStrategy s);
DiscretizationStrategy parse_strategy(std::string_view name);

/// Grid (1-D): m equally spaced points over [min - range/4, max + range/4]
/// of the nominal points. Resample: m draws from nominal points plus raw
/// data, without replacement while the candidates last. Auto picks Grid in
/// 1-D and Resample otherwise.
Points discretization_points(const NominalSpec& nominal, Eigen::Index m, DiscretizationStrategy strategy,
                             Rng& rng);

/// K ~= L L^T with L = K(:, P) L_PP^{-T}; stops once the largest residual
/// diagonal falls to `tol`.
struct PivotedCholesky {
    Eigen::MatrixXd L;                 // n x r
    std::vector<Eigen::Index> pivots;  // r
    Eigen::Index rank() const { return static_cast<Eigen::Index>(pivots.size()); }
};

PivotedCholesky pivoted_cholesky(const Eigen::MatrixXd& K, double tol);

struct DualProgram {
    NominalKind kind;
    Problem problem;
    Bandwidth bandwidth;
    Points all_points;          // nominal points first, then new discretization points
    Eigen::Index n_nominal;
    Eigen::MatrixXd gram;       // K over all_points
    PivotedCholesky factor;
    double epsilon;

    Eigen::Index num_points() const { return all_points.rows(); }
    /// Linear rows generated by (constraint point, affine piece) pairs.
    Eigen::Index sip_constraint_count() const;
    /// Second-order cones in the program (0 when epsilon == 0).
    Eigen::Index cone_count() const { return epsilon > 0.0 ? 1 : 0; }
    /// Mean nominal cost at x.
    double saa_cost(const Eigen::VectorXd& x) const;
};

/// Assembles the discretized dual. Discretization points that coincide with a
/// nominal point (or with each other) are dropped before the union.
DualProgram build_dual(const NominalSpec& nominal, const Points& zeta, double epsilon, const Problem& problem,
                       const Bandwidth& bw, double factor_tol = 1e-10);

struct DroSolverConfig {
    socp::Settings ipm;
    bool subgradient_fallback = true;
    int subgradient_iterations = 20000;
};

struct DualSolution {
    Eigen::VectorXd x;
    double g0 = 0.0;
    Eigen::VectorXd coeffs;  // alpha over all_points
    Eigen::VectorXd beta;    // L^T alpha
    double objective = 0.0;
    double rkhs_norm = 0.0;  // ||L^T alpha||_2
    std::string status;      // "optimal", "subgradient", or the interior-point failure status
    bool ok = false;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap_residual = 0.0;
    double feasibility_residual = 0.0;  // max_p f(x, p) - g0 - g(p)
};

DualSolution solve(const DualProgram& program, const DroSolverConfig& cfg = {});

/// The cone program handed to the interior-point solver, for inspection.
socp::ConeProgram assemble_cone_program(const DualProgram& program);

double evaluate_g(const DualSolution& sol, const DualProgram& program,
                  const Eigen::Ref<const Eigen::RowVectorXd>& xi);

struct CertificateReport {
    double expected_cost;
    double objective;
    double margin;          // objective - expected_cost
    double probe_distance;  // MMD from probe to the nominal measure
};

/// Weak-duality audit: for a probe inside the ball and supported on the
/// constraint points, E_probe f(x*, .) cannot exceed the dual objective.
CertificateReport worst_case_certificate(const DualSolution& sol, const DualProgram& program,
                                         const WeightedMeasure& probe);

} // namespace robas
