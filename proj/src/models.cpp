#include "robas/models.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "robas/error.hpp"

namespace robas {

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::GaussianLocation: return "gaussian-location";
    case ModelKind::GaussianMeanCov: return "gaussian-meancov";
    case ModelKind::ExponentialRate: return "exponential";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "gaussian-location") return ModelKind::GaussianLocation;
    if (name == "gaussian-meancov") return ModelKind::GaussianMeanCov;
    if (name == "exponential") return ModelKind::ExponentialRate;
    throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

Model Model::gaussian_location(Eigen::Index dim, double sigma) {
    if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sigma must be positive");
    return Model(ModelKind::GaussianLocation, dim, sigma);
}

Model Model::gaussian_mean_cov(Eigen::Index dim) {
    if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
    return Model(ModelKind::GaussianMeanCov, dim, 0.0);
}

Model Model::exponential_rate(Eigen::Index dim) {
    if (dim < 1) throw InvalidArgument("model dimension must be >= 1");
    return Model(ModelKind::ExponentialRate, dim, 0.0);
}

Eigen::Index Model::param_dim() const {
    switch (kind_) {
    case ModelKind::GaussianLocation: return dim_;
    case ModelKind::GaussianMeanCov: return dim_ + dim_ * (dim_ + 1) / 2;
    case ModelKind::ExponentialRate: return dim_;
    }
    return 0;
}

namespace {

// Position of L(i, k), k <= i, inside theta.
Eigen::Index lower_index(Eigen::Index dim, Eigen::Index i, Eigen::Index k) {
    return dim + i * (i + 1) / 2 + k;
}

} // namespace

Eigen::MatrixXd unpack_lower(const Eigen::VectorXd& theta, Eigen::Index dim) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index k = 0; k <= i; ++k) L(i, k) = theta(lower_index(dim, i, k));
    return L;
}

bool Model::is_valid(const Eigen::VectorXd& theta) const {
    if (theta.size() != param_dim() || !theta.allFinite()) return false;
    switch (kind_) {
    case ModelKind::GaussianLocation: return true;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i)
            if (!(theta(lower_index(dim_, i, i)) > 0.0)) return false;
        return true;
    case ModelKind::ExponentialRate: return (theta.array() > 0.0).all();
    }
    return false;
}

Eigen::VectorXd Model::constrain(const Eigen::VectorXd& eta) const {
    Eigen::VectorXd theta = eta;
    switch (kind_) {
    case ModelKind::GaussianLocation: break;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const auto p = lower_index(dim_, i, i);
            theta(p) = std::exp(eta(p));
        }
        break;
    case ModelKind::ExponentialRate: theta = eta.array().exp(); break;
    }
    return theta;
}

Eigen::VectorXd Model::unconstrain(const Eigen::VectorXd& theta) const {
    if (!is_valid(theta)) throw InvalidArgument("parameter outside the model's valid set");
    Eigen::VectorXd eta = theta;
    switch (kind_) {
    case ModelKind::GaussianLocation: break;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const auto p = lower_index(dim_, i, i);
            eta(p) = std::log(theta(p));
        }
        break;
    case ModelKind::ExponentialRate: eta = theta.array().log(); break;
    }
    return eta;
}

Eigen::VectorXd Model::constrain_derivative(const Eigen::VectorXd& eta) const {
    Eigen::VectorXd d = Eigen::VectorXd::Ones(eta.size());
    switch (kind_) {
    case ModelKind::GaussianLocation: break;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i) {
            const auto p = lower_index(dim_, i, i);
            d(p) = std::exp(eta(p));
        }
        break;
    case ModelKind::ExponentialRate: d = eta.array().exp(); break;
    }
    return d;
}

Points Model::draw_noise(Eigen::Index count, Rng& rng) const {
    Points u(count, dim_);
    if (kind_ == ModelKind::ExponentialRate) {
        std::exponential_distribution<double> e(1.0);
        for (Eigen::Index i = 0; i < count; ++i)
            for (Eigen::Index d = 0; d < dim_; ++d) u(i, d) = e(rng);
    } else {
        std::normal_distribution<double> z(0.0, 1.0);
        for (Eigen::Index i = 0; i < count; ++i)
            for (Eigen::Index d = 0; d < dim_; ++d) u(i, d) = z(rng);
    }
    return u;
}

Points Model::generate(const Eigen::VectorXd& theta, const Points& noise) const {
    if (noise.cols() != dim_) throw InvalidArgument("noise dimension mismatch");
    if (theta.size() != param_dim()) throw InvalidArgument("parameter dimension mismatch");
    Points y(noise.rows(), dim_);
    switch (kind_) {
    case ModelKind::GaussianLocation:
        for (Eigen::Index i = 0; i < noise.rows(); ++i)
            y.row(i) = theta.transpose() + sigma_ * noise.row(i);
        break;
    case ModelKind::GaussianMeanCov: {
        const Eigen::MatrixXd L = unpack_lower(theta, dim_);
        const Eigen::RowVectorXd mu = theta.head(dim_).transpose();
        for (Eigen::Index i = 0; i < noise.rows(); ++i)
            y.row(i) = mu + noise.row(i) * L.transpose();
        break;
    }
    case ModelKind::ExponentialRate:
        for (Eigen::Index i = 0; i < noise.rows(); ++i)
            y.row(i) = noise.row(i).array() / theta.transpose().array();
        break;
    }
    return y;
}

Eigen::MatrixXd Model::generator_jacobian(const Eigen::VectorXd& theta,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& u) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(dim_, param_dim());
    switch (kind_) {
    case ModelKind::GaussianLocation: J.setIdentity(); break;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i) {
            J(i, i) = 1.0;
            for (Eigen::Index k = 0; k <= i; ++k) J(i, lower_index(dim_, i, k)) = u(k);
        }
        break;
    case ModelKind::ExponentialRate:
        for (Eigen::Index d = 0; d < dim_; ++d) J(d, d) = -u(d) / (theta(d) * theta(d));
        break;
    }
    return J;
}

void Model::accumulate_vjp(const Eigen::VectorXd& theta, const Eigen::Ref<const Eigen::RowVectorXd>& u,
                           const Eigen::Ref<const Eigen::RowVectorXd>& dy, Eigen::VectorXd& grad) const {
    switch (kind_) {
    case ModelKind::GaussianLocation: grad += dy.transpose(); break;
    case ModelKind::GaussianMeanCov:
        for (Eigen::Index i = 0; i < dim_; ++i) {
            grad(i) += dy(i);
            for (Eigen::Index k = 0; k <= i; ++k) grad(lower_index(dim_, i, k)) += dy(i) * u(k);
        }
        break;
    case ModelKind::ExponentialRate:
        for (Eigen::Index d = 0; d < dim_; ++d) grad(d) -= dy(d) * u(d) / (theta(d) * theta(d));
        break;
    }
}

Eigen::VectorXd Model::mean(const Eigen::VectorXd& theta) const {
    switch (kind_) {
    case ModelKind::GaussianLocation: return theta;
    case ModelKind::GaussianMeanCov: return theta.head(dim_);
    case ModelKind::ExponentialRate: return theta.cwiseInverse();
    }
    return {};
}

Eigen::VectorXd Model::method_of_moments(const Points& data) const {
    if (data.rows() < 1 || data.cols() != dim_) throw InvalidArgument("data shape does not match model");
    const Eigen::VectorXd mu = data.colwise().mean().transpose();
    switch (kind_) {
    case ModelKind::GaussianLocation: return mu;
    case ModelKind::GaussianMeanCov: {
        const Eigen::Index n = data.rows();
        Eigen::MatrixXd centered = data.rowwise() - mu.transpose();
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim_, dim_);
        if (n > 1) cov = centered.transpose() * centered / double(n - 1);
        cov.diagonal().array() += 1e-6;
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) throw InvalidArgument("sample covariance is not positive definite");
        const Eigen::MatrixXd L = llt.matrixL();
        Eigen::VectorXd theta(param_dim());
        theta.head(dim_) = mu;
        for (Eigen::Index i = 0; i < dim_; ++i)
            for (Eigen::Index k = 0; k <= i; ++k) theta(lower_index(dim_, i, k)) = L(i, k);
        return theta;
    }
    case ModelKind::ExponentialRate:
        if ((mu.array() <= 0.0).any()) throw InvalidArgument("exponential model needs positive sample means");
        return mu.cwiseInverse();
    }
    return {};
}

std::string Model::describe() const {
    std::ostringstream os;
    os << to_string(kind_) << "(dim=" << dim_;
    if (kind_ == ModelKind::GaussianLocation) os << ", sigma=" << sigma_;
    os << ")";
    return os.str();
}

} // namespace robas
