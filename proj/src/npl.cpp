#include "robas/npl.hpp"

#include <cmath>
#include <random>
#include <string>

#include "robas/error.hpp"
#include "robas/parallel.hpp"

namespace robas {

void DPConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("DP concentration alpha must be >= 0");
    if (tau < 1) throw InvalidArgument("DP truncation tau must be >= 1");
    if (alpha > 0.0 && !prior_sampler) throw InvalidArgument("alpha > 0 requires a prior sampler");
}

void AdamConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (steps < 1) throw InvalidArgument("optimizer steps must be >= 1");
    if (model_batch < 2) throw InvalidArgument("model batch must be >= 2");
}

DirichletDraw sample_dp_weights(Eigen::Index n, const DPConfig& cfg, Rng& rng) {
    if (n < 1) throw InvalidArgument("need at least one observation");
    cfg.validate();
    DirichletDraw draw{Eigen::VectorXd(n), Eigen::VectorXd::Zero(cfg.tau)};
    std::gamma_distribution<double> unit(1.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) draw.data_weights(i) = unit(rng);
    if (cfg.alpha > 0.0) {
        std::gamma_distribution<double> prior(cfg.alpha / double(cfg.tau), 1.0);
        for (Eigen::Index k = 0; k < cfg.tau; ++k) draw.prior_weights(k) = prior(rng);
    }
    const double total = draw.data_weights.sum() + draw.prior_weights.sum();
    draw.data_weights /= total;
    draw.prior_weights /= total;
    return draw;
}

WeightedMeasure sample_dp_measure(const Points& data, const DPConfig& cfg, Rng& rng) {
    const Eigen::Index n = data.rows();
    DirichletDraw w = sample_dp_weights(n, cfg, rng);
    if (cfg.alpha == 0.0) {
        // Renormalize so the simplex constraint holds to the last bit we can get.
        Eigen::VectorXd weights = w.data_weights / w.data_weights.sum();
        return WeightedMeasure(data, std::move(weights));
    }
    Points prior_atoms = cfg.prior_sampler(cfg.tau, rng);
    if (prior_atoms.rows() != cfg.tau || prior_atoms.cols() != data.cols())
        throw InvalidArgument("prior sampler returned the wrong shape");
    Points atoms(n + cfg.tau, data.cols());
    atoms.topRows(n) = data;
    atoms.bottomRows(cfg.tau) = prior_atoms;
    Eigen::VectorXd weights(n + cfg.tau);
    weights << w.data_weights, w.prior_weights;
    weights /= weights.sum();
    return WeightedMeasure(std::move(atoms), std::move(weights));
}

MmdLoss::MmdLoss(WeightedMeasure Q, Model model, Bandwidth bw)
    : Q_(std::move(Q)), model_(std::move(model)), bw_(bw), qq_(embedding_inner(Q_, Q_, bw_)) {
    if (Q_.dim() != model_.dim()) throw InvalidArgument("target and model dimensions differ");
}

LossEval MmdLoss::evaluate(const Eigen::VectorXd& theta, const Points& noise) const {
    const Eigen::Index m = noise.rows();
    if (m < 2) throw InvalidArgument("model batch must be >= 2");
    const Points y = model_.generate(theta, noise);
    const double c = bw_.inv_two_ell_sq();
    const double inv_ell_sq = 2.0 * c;
    const Eigen::Index D = y.cols();
    const auto& xi = Q_.atoms();
    const auto& w = Q_.weights();

    Points dy = Points::Zero(m, D);
    double yy = 0.0;
    const double pair_scale = 1.0 / (double(m) * double(m - 1));
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double k = std::exp(-detail::squared_distance(y.row(i), y.row(j)) * c);
            yy += 2.0 * k;
            // d k(y_i, y_j) / d y_j = k (y_i - y_j) / ell^2, and the pair appears twice.
            const Eigen::RowVectorXd g = (2.0 * pair_scale * k * inv_ell_sq) * (y.row(i) - y.row(j));
            dy.row(j) += g;
            dy.row(i) -= g;
        }
    }
    yy *= pair_scale;

    double yq = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        double row = 0.0;
        Eigen::RowVectorXd pull = Eigen::RowVectorXd::Zero(D);
        for (Eigen::Index i = 0; i < xi.rows(); ++i) {
            const double wk = w(i) * std::exp(-detail::squared_distance(y.row(j), xi.row(i)) * c);
            row += wk;
            pull += wk * (xi.row(i) - y.row(j));
        }
        yq += row;
        dy.row(j) -= (2.0 * inv_ell_sq / double(m)) * pull;
    }
    yq /= double(m);

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
    for (Eigen::Index j = 0; j < m; ++j) model_.accumulate_vjp(theta, noise.row(j), dy.row(j), grad);
    return {yy - 2.0 * yq + qq_, std::move(grad)};
}

double MmdLoss::value(const Eigen::VectorXd& theta, const Points& noise) const {
    return evaluate(theta, noise).value;
}

LossEval mmd_sq_model_loss(const Eigen::VectorXd& theta, const WeightedMeasure& Q, const Model& model,
                           const Points& noise, const Bandwidth& bw) {
    return MmdLoss(Q, model, bw).evaluate(theta, noise);
}

namespace {

Eigen::VectorXd run_adam(const MmdLoss& loss, const Eigen::VectorXd& init, const AdamConfig& adam, Rng& rng) {
    adam.validate();
    const Model& model = loss.model();
    if (!model.is_valid(init)) throw InvalidArgument("initial parameter outside the model's valid set");
    Eigen::VectorXd eta = model.unconstrain(init);
    Eigen::VectorXd m1 = Eigen::VectorXd::Zero(eta.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(eta.size());
    double b1t = 1.0;
    double b2t = 1.0;
    for (int step = 1; step <= adam.steps; ++step) {
        const Eigen::VectorXd theta = model.constrain(eta);
        const Points noise = model.draw_noise(adam.model_batch, rng);
        const LossEval eval = loss.evaluate(theta, noise);
        const Eigen::VectorXd g = eval.gradient.cwiseProduct(model.constrain_derivative(eta));
        if (!std::isfinite(eval.value) || !g.allFinite())
            throw NonFinite("non-finite MMD loss or gradient at step " + std::to_string(step));
        m1 = adam.beta1 * m1 + (1.0 - adam.beta1) * g;
        m2 = adam.beta2 * m2 + (1.0 - adam.beta2) * g.cwiseAbs2();
        b1t *= adam.beta1;
        b2t *= adam.beta2;
        const Eigen::VectorXd mhat = m1 / (1.0 - b1t);
        const Eigen::VectorXd vhat = m2 / (1.0 - b2t);
        eta -= adam.learning_rate * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + adam.eps).matrix());
    }
    Eigen::VectorXd theta = model.constrain(eta);
    if (!model.is_valid(theta)) throw NonFinite("optimizer left the valid parameter set");
    return theta;
}

} // namespace

Eigen::VectorXd minimize_mmd(const WeightedMeasure& Q, const Model& model, const Eigen::VectorXd& init,
                             const AdamConfig& adam, const Bandwidth& bw, Rng& rng) {
    return run_adam(MmdLoss(Q, model, bw), init, adam, rng);
}

Eigen::VectorXd minimize_mmd(const WeightedMeasure& Q, const Model& model, const Eigen::VectorXd& init,
                             const AdamConfig& adam, const Bandwidth& bw) {
    Rng rng = make_stream(adam.seed, Stream::Optimizer);
    return minimize_mmd(Q, model, init, adam, bw, rng);
}

std::vector<Eigen::VectorXd> posterior_bootstrap(const Points& data, const Model& model, int B,
                                                 const DPConfig& dp, const AdamConfig& adam,
                                                 const Bandwidth& bw, std::uint64_t root_seed,
                                                 unsigned threads) {
    if (B < 1) throw InvalidArgument("number of bootstrap draws must be >= 1");
    dp.validate();
    adam.validate();
    const Eigen::VectorXd init = model.method_of_moments(data);
    std::vector<Eigen::VectorXd> thetas(static_cast<std::size_t>(B));
    parallel_for(thetas.size(), threads, [&](std::size_t j) {
        const auto key = static_cast<std::uint64_t>(j);
        Rng dp_rng = make_stream(root_seed, Stream::DirichletWeights, {key});
        Rng opt_rng = make_stream(root_seed, Stream::Optimizer, {key});
        try {
            const WeightedMeasure Q = sample_dp_measure(data, dp, dp_rng);
            thetas[j] = minimize_mmd(Q, model, init, adam, bw, opt_rng);
        } catch (const NonFinite& e) {
            throw NonFinite("posterior bootstrap draw " + std::to_string(j) + ": " + e.what());
        }
    });
    return thetas;
}

Points predictive_sample(const std::vector<Eigen::VectorXd>& thetas, const Model& model, Eigen::Index S,
                         Rng& rng) {
    if (S < 1) throw InvalidArgument("per-parameter sample count must be >= 1");
    if (thetas.empty()) throw InvalidArgument("no posterior parameters");
    const auto B = static_cast<Eigen::Index>(thetas.size());
    Points pool(B * S, model.dim());
    for (Eigen::Index j = 0; j < B; ++j)
        pool.middleRows(j * S, S) = model.sample(thetas[static_cast<std::size_t>(j)], S, rng);
    return pool;
}

BootstrapPosterior fit_predictive(const Points& data, const Model& model, const NplConfig& cfg,
                                  const Bandwidth& bw, std::uint64_t root_seed, unsigned threads) {
    auto thetas = posterior_bootstrap(data, model, cfg.B, cfg.dp, cfg.adam, bw, root_seed, threads);
    Rng rng = make_stream(root_seed, Stream::Predictive);
    Points pool = predictive_sample(thetas, model, cfg.S, rng);
    return {std::move(thetas), std::move(pool), bw};
}

PriorSampler gaussian_prior_from_data(const Points& data) {
    const Eigen::Index D = data.cols();
    const Eigen::RowVectorXd mu = data.colwise().mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(D, D) * 1e-6;
    if (data.rows() > 1) {
        const Eigen::MatrixXd centered = data.rowwise() - mu;
        cov += centered.transpose() * centered / double(data.rows() - 1);
    }
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    return [mu, L](Eigen::Index count, Rng& rng) {
        std::normal_distribution<double> z(0.0, 1.0);
        Points out(count, mu.size());
        for (Eigen::Index i = 0; i < count; ++i) {
            Eigen::VectorXd u(mu.size());
            for (Eigen::Index d = 0; d < u.size(); ++d) u(d) = z(rng);
            out.row(i) = mu + (L * u).transpose();
        }
        return out;
    };
}

NplConfig with_data_prior(NplConfig cfg, const Points& data) {
    if (cfg.dp.alpha > 0.0 && !cfg.dp.prior_sampler) cfg.dp.prior_sampler = gaussian_prior_from_data(data);
    return cfg;
}

} // namespace robas
