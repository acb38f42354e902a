#include <gtest/gtest.h>

#include <random>

#include "robas/error.hpp"
#include "robas/npl.hpp"

using namespace robas;

namespace {

Points normal_points(Eigen::Index n, Eigen::Index d, double mean, double sd, Rng& rng) {
    std::normal_distribution<double> z(mean, sd);
    Points p(n, d);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = z(rng);
    return p;
}

WeightedMeasure random_target(Rng& rng, Eigen::Index d, double mean, double sd, bool positive) {
    std::uniform_int_distribution<int> count(3, 15);
    std::gamma_distribution<double> gam(1.0, 1.0);
    Points atoms = normal_points(count(rng), d, mean, sd, rng);
    if (positive) atoms = atoms.cwiseAbs();
    Eigen::VectorXd w(atoms.rows());
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = gam(rng);
    return WeightedMeasure(atoms, w / w.sum());
}

// Independent evaluation of the loss value straight from its definition.
double loss_by_definition(const Eigen::VectorXd& theta, const WeightedMeasure& Q, const Model& model,
                          const Points& noise, const Bandwidth& bw) {
    const Points y = model.generate(theta, noise);
    const Eigen::Index m = y.rows();
    const Eigen::MatrixXd Kyy = gram(y, y, bw);
    const double yy = (Kyy.sum() - Kyy.trace()) / double(m * (m - 1));
    const double yq = (gram(y, Q.atoms(), bw) * Q.weights()).sum() / double(m);
    const double qq = Q.weights().dot(gram(Q.atoms(), Q.atoms(), bw) * Q.weights());
    return yy - 2.0 * yq + qq;
}

} // namespace

TEST(DirichletWeights, ZeroConcentrationDropsPrior) {
    Rng rng(1);
    DPConfig cfg;
    for (int rep = 0; rep < 50; ++rep) {
        const DirichletDraw d = sample_dp_weights(7, cfg, rng);
        EXPECT_TRUE((d.prior_weights.array() == 0.0).all());
        EXPECT_TRUE((d.data_weights.array() >= 0.0).all());
        EXPECT_NEAR(d.data_weights.sum(), 1.0, 1e-12);
    }
    const DirichletDraw one = sample_dp_weights(1, cfg, rng);
    EXPECT_DOUBLE_EQ(one.data_weights(0), 1.0);
}

TEST(DirichletWeights, SimplexWithPrior) {
    Rng rng(2);
    DPConfig cfg;
    cfg.alpha = 3.0;
    cfg.prior_sampler = [](Eigen::Index n, Rng&) { return Points::Zero(n, 1); };
    for (int rep = 0; rep < 50; ++rep) {
        const DirichletDraw d = sample_dp_weights(5, cfg, rng);
        EXPECT_EQ(d.prior_weights.size(), 100);
        EXPECT_TRUE((d.data_weights.array() >= 0.0).all() && (d.prior_weights.array() >= 0.0).all());
        EXPECT_NEAR(d.data_weights.sum() + d.prior_weights.sum(), 1.0, 1e-12);
    }
}

TEST(DirichletWeights, ConfigValidation) {
    Rng rng(3);
    DPConfig cfg;
    cfg.alpha = 1.0;
    EXPECT_THROW(sample_dp_weights(3, cfg, rng), InvalidArgument);
    cfg.alpha = -1.0;
    EXPECT_THROW(sample_dp_weights(3, cfg, rng), InvalidArgument);
    EXPECT_THROW(sample_dp_weights(0, DPConfig{}, rng), InvalidArgument);
}

TEST(DirichletMeasure, SupportAndSize) {
    Rng rng(4);
    const Points data = normal_points(6, 1, 0.0, 1.0, rng);
    const WeightedMeasure Q = sample_dp_measure(data, DPConfig{}, rng);
    EXPECT_EQ(Q.size(), 6);
    EXPECT_TRUE(Q.atoms() == data);
    const WeightedMeasure single = sample_dp_measure(data.topRows(1), DPConfig{}, rng);
    EXPECT_DOUBLE_EQ(single.weights()(0), 1.0);

    DPConfig cfg;
    cfg.alpha = 2.0;
    cfg.prior_sampler = gaussian_prior_from_data(data);
    EXPECT_EQ(sample_dp_measure(data, cfg, rng).size(), 6 + 100);
}

TEST(MmdLoss, ValueMatchesDefinition) {
    Rng rng(5);
    const Model model = Model::gaussian_location(2, 1.0);
    const WeightedMeasure Q = random_target(rng, 2, 0.0, 1.0, false);
    const Points noise = model.draw_noise(20, rng);
    const Eigen::Vector2d theta(0.3, -0.2);
    const Bandwidth bw(0.9);
    EXPECT_NEAR(mmd_sq_model_loss(theta, Q, model, noise, bw).value, loss_by_definition(theta, Q, model, noise, bw),
                1e-12);
}

TEST(MmdLoss, GradientMatchesCentralDifferences) {
    Rng rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const int family = rep % 3;
        const Eigen::Index D = 1 + rep % 2;
        Model model = family == 0 ? Model::gaussian_location(D, 0.5 + std::abs(u(rng)))
                    : family == 1 ? Model::gaussian_mean_cov(D)
                                  : Model::exponential_rate(D);
        const WeightedMeasure Q = random_target(rng, D, family == 2 ? 1.0 : 0.0, 1.0, family == 2);
        Eigen::VectorXd eta(model.param_dim());
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) = 0.5 * u(rng);
        const Eigen::VectorXd theta = model.constrain(eta);
        const Points noise = model.draw_noise(10, rng);
        const Bandwidth bw(0.5 + std::abs(u(rng)));
        const MmdLoss loss(Q, model, bw);
        const Eigen::VectorXd g = loss.evaluate(theta, noise).gradient;
        Eigen::VectorXd fd(theta.size());
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(k) += 1e-5;
            tm(k) -= 1e-5;
            fd(k) = (loss.value(tp, noise) - loss.value(tm, noise)) / 2e-5;
        }
        EXPECT_LE((g - fd).norm(), 1e-4 * std::max(fd.norm(), 1e-6)) << model.describe() << " rep " << rep;
        ++checked;
    }
    EXPECT_EQ(checked, 50);
}

TEST(MmdLoss, GradientPullsTowardPointMass) {
    const Model model = Model::gaussian_location(1, 1e-3);
    const WeightedMeasure Q = WeightedMeasure::uniform(Points::Constant(1, 1, 2.0));
    Rng rng(7);
    const Points noise = model.draw_noise(10, rng);
    const Bandwidth bw(1.0);
    EXPECT_LT(mmd_sq_model_loss(Eigen::VectorXd::Constant(1, 1.0), Q, model, noise, bw).gradient(0), 0.0);
    EXPECT_GT(mmd_sq_model_loss(Eigen::VectorXd::Constant(1, 3.0), Q, model, noise, bw).gradient(0), 0.0);
}

TEST(MinimizeMmd, RecoversGaussianLocation) {
    Rng rng(8);
    const Model model = Model::gaussian_location(1, 5.0);
    const Points data = model.sample(Eigen::VectorXd::Constant(1, 25.0), 500, rng);
    const WeightedMeasure Q = WeightedMeasure::uniform(data);
    AdamConfig adam;
    adam.seed = 1;
    const Eigen::VectorXd theta =
        minimize_mmd(Q, model, Eigen::VectorXd::Constant(1, 15.0), adam, median_heuristic(data));
    EXPECT_NEAR(theta(0), 25.0, 1.0);
}

TEST(MinimizeMmd, RecoversExponentialRate) {
    Rng rng(9);
    const Model model = Model::exponential_rate(1);
    const Points data = model.sample(Eigen::VectorXd::Constant(1, 0.05), 500, rng);
    const WeightedMeasure Q = WeightedMeasure::uniform(data);
    AdamConfig adam;
    adam.seed = 2;
    const Eigen::VectorXd theta = minimize_mmd(Q, model, model.method_of_moments(data), adam, median_heuristic(data));
    EXPECT_NEAR(theta(0), 0.05, 0.01);
}

TEST(MinimizeMmd, DoesNotWorsenDistantStart) {
    Rng rng(10);
    const Model model = Model::gaussian_location(1, 1.0);
    const Points data = model.sample(Eigen::VectorXd::Constant(1, 0.0), 200, rng);
    const WeightedMeasure Q = WeightedMeasure::uniform(data);
    const Bandwidth bw = median_heuristic(data);
    const Eigen::VectorXd init = Eigen::VectorXd::Constant(1, 4.0);
    const Eigen::VectorXd theta = minimize_mmd(Q, model, init, AdamConfig{}, bw);
    Rng eval(11);
    const Points u = model.draw_noise(2000, eval);
    const MmdLoss loss(Q, model, bw);
    EXPECT_LE(loss.value(theta, u), loss.value(init, u));
}

TEST(MinimizeMmd, RejectsInvalidInit) {
    const Model model = Model::exponential_rate(1);
    const WeightedMeasure Q = WeightedMeasure::uniform(Points::Constant(2, 1, 1.0));
    EXPECT_THROW(minimize_mmd(Q, model, Eigen::VectorXd::Constant(1, -1.0), AdamConfig{}, Bandwidth(1.0)),
                 InvalidArgument);
}

TEST(PosteriorBootstrap, DeterministicAcrossThreadCounts) {
    Rng rng(12);
    const Model model = Model::gaussian_location(1, 1.0);
    const Points data = normal_points(20, 1, 0.0, 1.0, rng);
    AdamConfig adam;
    adam.steps = 50;
    const Bandwidth bw = median_heuristic(data);
    const auto a = posterior_bootstrap(data, model, 6, DPConfig{}, adam, bw, 99, 1);
    const auto b = posterior_bootstrap(data, model, 6, DPConfig{}, adam, bw, 99, 1);
    const auto c = posterior_bootstrap(data, model, 6, DPConfig{}, adam, bw, 99, 3);
    for (std::size_t j = 0; j < a.size(); ++j) {
        EXPECT_TRUE(a[j] == b[j]);
        EXPECT_TRUE(a[j] == c[j]);
    }
    const auto d = posterior_bootstrap(data, model, 6, DPConfig{}, adam, bw, 100, 1);
    EXPECT_FALSE(a[0] == d[0]);
}

TEST(PosteriorBootstrap, SingleDrawNearTruth) {
    Rng rng(13);
    const Model model = Model::gaussian_location(1, 2.0);
    const Points data = model.sample(Eigen::VectorXd::Constant(1, 10.0), 400, rng);
    const auto thetas = posterior_bootstrap(data, model, 1, DPConfig{}, AdamConfig{}, median_heuristic(data), 5);
    EXPECT_NEAR(thetas[0](0), 10.0, 0.6);
}

TEST(PosteriorBootstrap, BimodalDataSpreadsPosterior) {
    Rng rng(14);
    const Model model = Model::gaussian_location(1, 5.0);
    Points bimodal(20, 1), clean(20, 1);
    std::normal_distribution<double> z(0.0, 5.0);
    std::bernoulli_distribution coin(0.5);
    for (Eigen::Index i = 0; i < 20; ++i) {
        bimodal(i, 0) = (coin(rng) ? 10.0 : 60.0) + z(rng);
        clean(i, 0) = 10.0 + z(rng);
    }
    auto spread = [&](const Points& data) {
        const auto t = posterior_bootstrap(data, model, 30, DPConfig{}, AdamConfig{}, median_heuristic(data), 21);
        double mean = 0.0, ss = 0.0;
        for (const auto& v : t) mean += v(0) / double(t.size());
        for (const auto& v : t) ss += (v(0) - mean) * (v(0) - mean);
        return std::sqrt(ss / double(t.size() - 1));
    };
    EXPECT_GT(spread(bimodal), spread(clean));
}

TEST(PredictiveSample, PoolShapeAndMean) {
    Rng rng(15);
    const Model model = Model::gaussian_location(1, 5.0);
    std::vector<Eigen::VectorXd> thetas;
    double mean_theta = 0.0;
    for (int j = 0; j < 30; ++j) {
        thetas.push_back(Eigen::VectorXd::Constant(1, 20.0 + j % 7));
        mean_theta += thetas.back()(0) / 30.0;
    }
    const Points pool = predictive_sample(thetas, model, 30, rng);
    EXPECT_EQ(pool.rows(), 900);
    EXPECT_NEAR(pool.mean(), mean_theta, 3.0 * 5.0 / std::sqrt(900.0));
    EXPECT_EQ(predictive_sample({thetas[0]}, model, 30, rng).rows(), 30);
    EXPECT_THROW(predictive_sample(thetas, model, 0, rng), InvalidArgument);
}

TEST(FitPredictive, PoolHasBTimesSRows) {
    Rng rng(16);
    const Model model = Model::exponential_rate(1);
    const Points data = model.sample(Eigen::VectorXd::Constant(1, 0.1), 30, rng);
    NplConfig cfg;
    cfg.B = 4;
    cfg.S = 7;
    cfg.adam.steps = 40;
    const BootstrapPosterior post = fit_predictive(data, model, cfg, median_heuristic(data), 3);
    EXPECT_EQ(post.thetas.size(), 4u);
    EXPECT_EQ(post.predictive_pool.rows(), 28);
    for (const auto& t : post.thetas) EXPECT_TRUE(model.is_valid(t));
}
