#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <random>

#include "robas/kernel.hpp"

using namespace robas;

namespace {

Points column(std::initializer_list<double> v) {
    Points p(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) p(i++, 0) = x;
    return p;
}

// Random discrete measure whose atoms are drawn from a small lattice so that
// coincidences between two measures actually happen.
WeightedMeasure random_measure(std::mt19937_64& rng, Eigen::Index dim) {
    std::uniform_int_distribution<int> count(1, 6), cell(-2, 2);
    std::gamma_distribution<double> gam(1.0, 1.0);
    const int n = count(rng);
    Points atoms(n, dim);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) atoms(i, d) = 0.7 * cell(rng);
        w(i) = gam(rng);
    }
    return WeightedMeasure(atoms, w / w.sum());
}

// atom -> total weight; merges duplicated atoms.
std::map<std::vector<double>, double> mass_map(const WeightedMeasure& m) {
    std::map<std::vector<double>, double> out;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const auto row = m.atoms().row(i);
        out[{row.data(), row.data() + row.size()}] += m.weights()(i);
    }
    return out;
}

bool same_measure(const WeightedMeasure& a, const WeightedMeasure& b) {
    auto ma = mass_map(a), mb = mass_map(b);
    for (auto& [k, v] : mb) ma[k] -= v;
    for (auto& [k, v] : ma)
        if (std::abs(v) > 1e-12) return false;
    return true;
}

} // namespace

TEST(MedianHeuristic, OddCount) {
    EXPECT_NEAR(median_heuristic(column({0.0, 1.0, 3.0})).ell(), std::sqrt(2.0), 1e-12);
}

TEST(MedianHeuristic, RepeatedAtom) {
    Points p(3, 2);
    p << 0, 0, 0, 0, 1, 1;
    EXPECT_NEAR(median_heuristic(p).ell(), 1.0, 1e-12);
}

TEST(MedianHeuristic, EvenCountAveragesCentralPair) {
    // squared distances {1, 4, 9, 1, 4, 1}: sorted 1 1 1 4 4 9, median (1 + 4) / 2
    EXPECT_NEAR(median_heuristic(column({0.0, 1.0, 2.0, 3.0})).ell(), std::sqrt(1.25), 1e-12);
}

TEST(MedianHeuristic, IdenticalPointsAreDegenerate) {
    EXPECT_THROW(median_heuristic(column({4.0, 4.0})), DegenerateData);
    EXPECT_THROW(median_heuristic(column({4.0})), InvalidArgument);
}

TEST(KernelEval, Examples) {
    const Bandwidth one(1.0);
    const Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(1);
    const Eigen::RowVectorXd y = Eigen::RowVectorXd::Constant(1, 2.0);
    EXPECT_DOUBLE_EQ(kernel_eval(x, x, one), 1.0);
    EXPECT_NEAR(kernel_eval(x, y, one), 0.1353352832366127, 1e-15);
    const Bandwidth ell(3.7);
    EXPECT_NEAR(kernel_eval(x, Eigen::RowVectorXd::Constant(1, 2.0 * 3.7), ell), std::exp(-2.0), 1e-15);
    EXPECT_THROW(kernel_eval(x, Eigen::RowVectorXd::Zero(2), one), InvalidArgument);
}

TEST(Bandwidth, RejectsNonPositive) {
    EXPECT_THROW(Bandwidth(0.0), InvalidArgument);
    EXPECT_THROW(Bandwidth(-1.0), InvalidArgument);
    EXPECT_THROW(Bandwidth(std::numeric_limits<double>::infinity()), InvalidArgument);
}

TEST(Gram, ShapeAndEntries) {
    const Bandwidth one(1.0);
    EXPECT_NEAR(gram(column({0.0}), column({2.0}), one)(0, 0), 0.1353352832366127, 1e-15);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    Points A(25, 3);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = z(rng);
    const Eigen::MatrixXd K = gram(A, A, Bandwidth(0.9));
    EXPECT_EQ(K, K.transpose());
    EXPECT_TRUE((K.diagonal().array() == 1.0).all());
    EXPECT_TRUE((K.array() >= 0.0).all() && (K.array() <= 1.0).all());
    EXPECT_THROW(gram(Points(0, 3), A, one), InvalidArgument);
    EXPECT_THROW(gram(A, column({1.0}), one), InvalidArgument);
}

TEST(Gram, PositiveSemidefinite) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 10; ++rep) {
        Points A(40, 2);
        for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = z(rng);
        const Eigen::MatrixXd K = gram(A, A, Bandwidth(0.3 + 0.3 * rep));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8);
    }
}

TEST(MmdSq, PointMasses) {
    const Bandwidth one(1.0);
    const auto P = WeightedMeasure::uniform(column({0.0}));
    const auto Q = WeightedMeasure::uniform(column({2.0}));
    EXPECT_NEAR(mmd_sq(P, Q, one), 2.0 - 2.0 * std::exp(-2.0), 1e-14);
    EXPECT_EQ(mmd_sq(P, P, one), 0.0);
    const WeightedMeasure split(column({0.0, 0.0}), Eigen::Vector2d(0.5, 0.5));
    EXPECT_NEAR(mmd_sq(P, split, one), 0.0, 1e-15);
}

TEST(MmdSq, MatchesQuadraticForm) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const WeightedMeasure P = random_measure(rng, 2), Q = random_measure(rng, 2);
        const Bandwidth bw(0.8);
        const double expected = P.weights().dot(gram(P.atoms(), P.atoms(), bw) * P.weights()) -
                                2.0 * P.weights().dot(gram(P.atoms(), Q.atoms(), bw) * Q.weights()) +
                                Q.weights().dot(gram(Q.atoms(), Q.atoms(), bw) * Q.weights());
        EXPECT_NEAR(mmd_sq(P, Q, bw), std::max(expected, 0.0), 1e-12);
    }
}

TEST(MmdSq, NonnegativeAndSymmetric) {
    std::mt19937_64 rng(4);
    const Bandwidth bw(1.1);
    for (int rep = 0; rep < 200; ++rep) {
        const WeightedMeasure P = random_measure(rng, 2), Q = random_measure(rng, 2);
        const double pq = mmd_sq(P, Q, bw), qp = mmd_sq(Q, P, bw);
        EXPECT_GE(pq, 0.0);
        EXPECT_LE(std::abs(pq - qp), 1e-12);
    }
}

TEST(MmdSq, ZeroExactlyForIdenticalMeasures) {
    std::mt19937_64 rng(5);
    const Bandwidth bw(1.0);
    int identical = 0;
    for (int rep = 0; rep < 400; ++rep) {
        const WeightedMeasure P = random_measure(rng, 1);
        // Half the time compare against a re-listed copy of P.
        WeightedMeasure Q = random_measure(rng, 1);
        if (rep % 2 == 0) {
            Points atoms(P.size() * 2, 1);
            atoms << P.atoms(), P.atoms();
            Eigen::VectorXd w(P.size() * 2);
            w << 0.5 * P.weights(), 0.5 * P.weights();
            Q = WeightedMeasure(atoms, w);
        }
        const bool same = same_measure(P, Q);
        identical += same;
        EXPECT_EQ(mmd_sq(P, Q, bw) <= 1e-12, same) << "rep " << rep;
    }
    EXPECT_GT(identical, 100);
}

TEST(Mmd, TriangleInequality) {
    std::mt19937_64 rng(6);
    const Bandwidth bw(0.9);
    for (int rep = 0; rep < 200; ++rep) {
        const WeightedMeasure P = random_measure(rng, 2), Q = random_measure(rng, 2), R = random_measure(rng, 2);
        EXPECT_LE(mmd(P, R, bw), mmd(P, Q, bw) + mmd(Q, R, bw) + 1e-9);
    }
}

TEST(MmdSq, RejectsDimensionMismatch) {
    const auto P = WeightedMeasure::uniform(column({0.0}));
    const auto Q = WeightedMeasure::uniform(Points::Zero(1, 2));
    EXPECT_THROW(mmd_sq(P, Q, Bandwidth(1.0)), InvalidArgument);
}

TEST(MmdSq, ClampThreshold) {
    EXPECT_EQ(mmd_sq_from_inner(1.0, 1.0 + 1e-12, 1.0), 0.0);
    EXPECT_THROW(mmd_sq_from_inner(1.0, 1.0 + 1e-6, 1.0), InternalConsistency);
}

TEST(WeightedMeasure, Validation) {
    EXPECT_THROW(WeightedMeasure(column({0.0, 1.0}), Eigen::Vector2d(0.5, 0.6)), InvalidArgument);
    EXPECT_THROW(WeightedMeasure(column({0.0, 1.0}), Eigen::Vector2d(1.5, -0.5)), InvalidArgument);
    EXPECT_THROW(WeightedMeasure(column({0.0, 1.0}), Eigen::VectorXd::Ones(1)), InvalidArgument);
    EXPECT_THROW(WeightedMeasure::uniform(Points(0, 1)), InvalidArgument);
}

TEST(ReferenceEmbedding, AgreesWithDirectMmd) {
    std::mt19937_64 rng(7);
    const Bandwidth bw(0.6);
    const WeightedMeasure R = random_measure(rng, 2);
    const ReferenceEmbedding ref(R, bw);
    for (int rep = 0; rep < 20; ++rep) {
        const WeightedMeasure P = random_measure(rng, 2);
        EXPECT_NEAR(ref.mmd_sq_to(P), mmd_sq(P, R, bw), 1e-13);
    }
}

TEST(Kernel, FloatScalar) {
    PointsT<float> a(2, 1);
    a << 0.0f, 2.0f;
    const auto K = gram(a, a, BandwidthT<float>(1.0f));
    EXPECT_NEAR(K(0, 1), 0.135335f, 1e-6f);
}
