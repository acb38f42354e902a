// Data-generating processes, radius calibration, and the out-of-sample
// experiment harness.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "robas/dro.hpp"
#include "robas/kernel.hpp"
#include "robas/models.hpp"
#include "robas/npl.hpp"
#include "robas/problems.hpp"

namespace robas {

enum class DgpKind { BimodalGaussian, ContaminatedGaussian, ContaminatedExponential, PortfolioGaussian };

std::string_view to_string(DgpKind kind);
DgpKind parse_dgp_kind(std::string_view name);

/// Training draws come from (1 - eta) clean + eta contaminant; test draws
/// from the clean component only. The bimodal mixture has no contamination
/// and is shared by train and test.
struct DGPSpec {
    DgpKind kind = DgpKind::ContaminatedGaussian;
    Eigen::VectorXd center;        // bimodal: theta1; gaussian: theta*; portfolio: mu*
    Eigen::VectorXd other;         // bimodal: theta2; gaussian: theta'; portfolio: mu'
    double sigma = 1.0;            // component standard deviation
    double eta = 0.0;              // contamination level
    double rate = 1.0;             // exponential clean rate
    double outlier_mean = 0.0;     // exponential contaminant N(outlier_mean, outlier_sd^2)
    double outlier_sd = 1.0;
    Eigen::MatrixXd covariance;    // portfolio Sigma*

    static DGPSpec bimodal(Eigen::VectorXd theta1, Eigen::VectorXd theta2, double sigma);
    static DGPSpec contaminated_gaussian(Eigen::VectorXd theta_star, Eigen::VectorXd theta_prime, double sigma,
                                         double eta);
    static DGPSpec contaminated_exponential(double rate, double outlier_mean, double outlier_sd, double eta);
    /// Five assets; contamination shifts the last three means down by 0.3.
    static DGPSpec portfolio(double eta);

    Eigen::Index dim() const;
    void validate() const;
};

enum class Split { Train, Test };

Points sample_dgp(const DGPSpec& spec, Eigen::Index n, Split split, Rng& rng);

/// Tolerance constant C_{n,M,alpha} for the predictive's distance to the DGP:
///   2 [ sqrt(M/n) + sqrt((2M(n-1) + a(a+1)) / ((a+n)(a+n+1)))
///       + sqrt(M a(a+1) / ((a+n)(a+n+1))) + sqrt(2 n M log(1/delta)) / (a+n) ].
double radius_constant(double n, double M, double alpha, double delta);

/// 4 eta + 2 C.
double huber_radius(double eta, double C);

struct CoverageConfig {
    DGPSpec dgp;                 // training process; its clean component is the target
    Model model = Model::gaussian_location(1, 1.0);
    Eigen::Index n = 20;
    int reps = 50;
    double delta = 0.1;
    double M = 1.0;
    NplConfig npl;
    Eigen::Index reference_size = 10000;
    Eigen::Index inf_fit_size = 1000;
    Eigen::Index inf_model_samples = 2000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct CoverageReport {
    std::vector<double> distances;  // D_k(P*, predictive) per rep
    std::vector<double> epsilons;   // calibrated radius per rep
    double coverage = 0.0;          // fraction of reps with distance <= epsilon

    double coverage_at(double epsilon) const;
};

/// Empirical frequency with which the calibrated radius C + inf-term covers
/// the clean DGP (inf-term approximated at a fitted parameter).
CoverageReport coverage_probe(const CoverageConfig& cfg);

struct ExpectedMmdIdentity {
    double lhs;       // mean_j MMD^2(P, P_theta_j)
    double rhs;       // MMD^2(P, pooled predictive) + v
    double v;         // spread of the model embeddings
    double pred_mmd_sq;
};

/// Checks E_j MMD^2(P, P_j) = MMD^2(P, mean_j P_j) + v with every P_j an
/// S-sample empirical measure. Throws InternalConsistency if the two sides
/// differ by more than 1e-8 (1 + |lhs|).
ExpectedMmdIdentity appendix_c_identity(const std::vector<Eigen::VectorXd>& thetas, const Model& model,
                                        Eigen::Index S, const Bandwidth& bw, const WeightedMeasure& probe,
                                        Rng& rng);

struct ExperimentConfig {
    DGPSpec dgp;
    Problem problem = Problem::newsvendor(1);
    Model model = Model::gaussian_location(1, 5.0);
    std::vector<NominalKind> methods{NominalKind::RoBAS, NominalKind::EmpiricalMMD};
    std::vector<double> epsilon_grid{0.05, 0.1};
    Eigen::Index n_train = 20;
    Eigen::Index T_test = 50;
    int J_reps = 20;
    std::uint64_t seed = 0;
    NplConfig npl;
    Eigen::Index discretization_points = 200;
    DiscretizationStrategy strategy = DiscretizationStrategy::Auto;
    DroSolverConfig solver;
    unsigned threads = 1;
    bool record_timings = true;  // false writes zero timings so reruns are byte-identical

    void validate() const;
};

struct ResultRow {
    NominalKind method;
    double epsilon;
    int seed;                  // repetition index j
    Eigen::VectorXd x;
    std::vector<double> costs; // T out-of-sample costs
    double oos_mean;
    double oos_var;            // sample variance of this row's costs
    double solve_time_s;
    double sample_time_s;
    std::string status;
    bool ok;
};

struct SummaryRow {
    NominalKind method;
    double epsilon;
    double m;                  // pooled out-of-sample mean
    double v;                  // pooled variance, JT - 1 denominator
    std::size_t count;         // rows that entered the summary
    std::size_t failures;
    double solve_time_s;       // mean over rows
    double sample_time_s;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<SummaryRow> summary;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// m(eps), v(eps) per (method, eps) from the stored cost samples; failed
/// rows are excluded.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

/// Contaminated location setup: clean N(0, 1), outliers N(5, 1) at rate eta,
/// and a pathological model N(1, 1) centred on the contaminated mean.
struct RobustnessSetup {
    double clean_mean = 0.0;
    double outlier_mean = 5.0;
    double pathological_mean = 1.0;
    double sigma = 1.0;
    double eta = 0.2;
    Eigen::Index n = 200;
    Eigen::Index reference_size = 10000;
    NplConfig npl;
};

struct RobustnessSample {
    double to_clean;         // D_k(predictive, clean DGP)
    double to_pathological;  // D_k(predictive, pathological model)
};

RobustnessSample robustness_check(const RobustnessSetup& setup, std::uint64_t seed, unsigned threads = 1);

} // namespace robas
