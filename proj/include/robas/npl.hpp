// Nonparametric learning with the MMD: approximate Dirichlet-process
// posterior draws, minimum-MMD estimation, the posterior bootstrap, and the
// resulting predictive sample pool.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "robas/kernel.hpp"
#include "robas/models.hpp"
#include "robas/random.hpp"

namespace robas {

/// Draws `count` iid atoms from the DP base measure F.
using PriorSampler = std::function<Points(Eigen::Index count, Rng& rng)>;

struct DPConfig {
    double alpha = 0.0;
    Eigen::Index tau = 100;
    PriorSampler prior_sampler;  // required iff alpha > 0

    void validate() const;
};

struct AdamConfig {
    double learning_rate = 0.1;
    int steps = 300;
    Eigen::Index model_batch = 50;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct DirichletDraw {
    Eigen::VectorXd data_weights;   // w_{1:n}
    Eigen::VectorXd prior_weights;  // w~_{1:tau}; exactly zero when alpha = 0
};

/// (w_{1:n}, w~_{1:tau}) ~ Dir(1, ..., 1, alpha/tau, ..., alpha/tau) by
/// normalizing Gamma variates.
DirichletDraw sample_dp_weights(Eigen::Index n, const DPConfig& cfg, Rng& rng);

/// Q = sum_i w_i delta_{xi_i} + sum_k w~_k delta_{xi~_k}. Prior atoms are
/// omitted entirely when alpha = 0.
WeightedMeasure sample_dp_measure(const Points& data, const DPConfig& cfg, Rng& rng);

struct LossEval {
    double value;
    Eigen::VectorXd gradient;  // with respect to the constrained theta
};

/// Sample-based MMD^2 between P_theta and a fixed discrete Q:
///   U-statistic over the model batch, exact cross and Q-only terms.
/// The Q-only term is computed once at construction.
class MmdLoss {
public:
    MmdLoss(WeightedMeasure Q, Model model, Bandwidth bw);

    /// noise holds one base-noise row per model sample (at least two rows).
    LossEval evaluate(const Eigen::VectorXd& theta, const Points& noise) const;
    double value(const Eigen::VectorXd& theta, const Points& noise) const;

    const WeightedMeasure& target() const { return Q_; }
    const Model& model() const { return model_; }
    double target_self_term() const { return qq_; }

private:
    WeightedMeasure Q_;
    Model model_;
    Bandwidth bw_;
    double qq_;
};

LossEval mmd_sq_model_loss(const Eigen::VectorXd& theta, const WeightedMeasure& Q, const Model& model,
                           const Points& noise, const Bandwidth& bw);

/// Adam on the unconstrained parametrization, resampling generator noise
/// every step. Returns the final iterate in constrained space.
Eigen::VectorXd minimize_mmd(const WeightedMeasure& Q, const Model& model, const Eigen::VectorXd& init,
                             const AdamConfig& adam, const Bandwidth& bw, Rng& rng);
Eigen::VectorXd minimize_mmd(const WeightedMeasure& Q, const Model& model, const Eigen::VectorXd& init,
                             const AdamConfig& adam, const Bandwidth& bw);

/// theta^(j) = argmin MMD(P_theta, Q^(j)) for B approximate DP draws. Draw j
/// uses streams keyed by (root_seed, j) so results do not depend on threads.
std::vector<Eigen::VectorXd> posterior_bootstrap(const Points& data, const Model& model, int B,
                                                 const DPConfig& dp, const AdamConfig& adam,
                                                 const Bandwidth& bw, std::uint64_t root_seed,
                                                 unsigned threads = 1);

/// S iid draws from each P_{theta^(j)}, concatenated in j order.
Points predictive_sample(const std::vector<Eigen::VectorXd>& thetas, const Model& model, Eigen::Index S,
                         Rng& rng);

struct BootstrapPosterior {
    std::vector<Eigen::VectorXd> thetas;
    Points predictive_pool;
    Bandwidth bandwidth;
};

struct NplConfig {
    int B = 30;
    Eigen::Index S = 30;
    DPConfig dp;
    AdamConfig adam;
};

/// Posterior bootstrap followed by predictive sampling.
BootstrapPosterior fit_predictive(const Points& data, const Model& model, const NplConfig& cfg,
                                  const Bandwidth& bw, std::uint64_t root_seed, unsigned threads = 1);

/// F = N(sample mean, sample covariance + jitter); a data-driven base
/// measure for runs with alpha > 0.
PriorSampler gaussian_prior_from_data(const Points& data);

/// Fills in the data-driven base measure when alpha > 0 and none is set.
NplConfig with_data_prior(NplConfig cfg, const Points& data);

} // namespace robas
