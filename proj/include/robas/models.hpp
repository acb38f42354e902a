// Parametric generator families P_theta with reparameterized samplers.
//
// A sample is y = generate(theta, u) for noise u drawn from a fixed base
// distribution, so gradients of sample-based losses flow through theta.
// Optimizers work on an unconstrained vector eta with theta = constrain(eta).
#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

#include "robas/kernel.hpp"
#include "robas/random.hpp"

namespace robas {

enum class ModelKind { GaussianLocation, GaussianMeanCov, ExponentialRate };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

class Model {
public:
    /// N(theta, sigma^2 I) with sigma known; theta in R^D.
    static Model gaussian_location(Eigen::Index dim, double sigma);
    /// N(mu, L L^T); theta = (mu, packed lower-triangular L with positive diagonal).
    static Model gaussian_mean_cov(Eigen::Index dim);
    /// Independent Exp(rate_d) coordinates; theta = rates > 0.
    static Model exponential_rate(Eigen::Index dim = 1);

    ModelKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    Eigen::Index param_dim() const;
    double sigma() const { return sigma_; }

    bool is_valid(const Eigen::VectorXd& theta) const;

    Eigen::VectorXd constrain(const Eigen::VectorXd& eta) const;
    Eigen::VectorXd unconstrain(const Eigen::VectorXd& theta) const;
    /// Diagonal of d theta / d eta (the parametrization is coordinatewise).
    Eigen::VectorXd constrain_derivative(const Eigen::VectorXd& eta) const;

    /// Base noise, one row per sample.
    Points draw_noise(Eigen::Index count, Rng& rng) const;
    Points generate(const Eigen::VectorXd& theta, const Points& noise) const;
    /// d y / d theta for one noise row (D x param_dim).
    Eigen::MatrixXd generator_jacobian(const Eigen::VectorXd& theta,
                                       const Eigen::Ref<const Eigen::RowVectorXd>& u) const;
    /// grad += (d y / d theta)^T dy, without forming the Jacobian.
    void accumulate_vjp(const Eigen::VectorXd& theta, const Eigen::Ref<const Eigen::RowVectorXd>& u,
                        const Eigen::Ref<const Eigen::RowVectorXd>& dy, Eigen::VectorXd& grad) const;

    Points sample(const Eigen::VectorXd& theta, Eigen::Index count, Rng& rng) const {
        return generate(theta, draw_noise(count, rng));
    }
    Eigen::VectorXd mean(const Eigen::VectorXd& theta) const;

    /// Moment-matching fit used to initialize the minimum-MMD optimizer.
    Eigen::VectorXd method_of_moments(const Points& data) const;

    std::string describe() const;

private:
    Model(ModelKind kind, Eigen::Index dim, double sigma) : kind_(kind), dim_(dim), sigma_(sigma) {}

    ModelKind kind_;
    Eigen::Index dim_;
    double sigma_;
};

/// Lower-triangular factor stored row-major in theta after the mean block.
Eigen::MatrixXd unpack_lower(const Eigen::VectorXd& theta, Eigen::Index dim);

} // namespace robas
