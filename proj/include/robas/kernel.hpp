// Gaussian-kernel primitives: bandwidth, Gram matrices, and exact MMD between
// finite discrete measures.
//
// Point sets are stored one point per row. All routines are pure; Gram
// entries are summed row-major, left-to-right, so results are bitwise
// reproducible for a given input order.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "robas/error.hpp"

namespace robas {

template <typename Scalar>
using PointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Points = PointsT<double>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Length-scale of the Gaussian kernel, in data units.
template <typename Scalar>
class BandwidthT {
public:
    explicit BandwidthT(Scalar ell) : ell_(ell) {
        if (!(ell > Scalar(0)) || !std::isfinite(double(ell)))
            throw InvalidArgument("bandwidth must be positive and finite");
    }
    Scalar ell() const { return ell_; }
    Scalar inv_two_ell_sq() const { return Scalar(1) / (Scalar(2) * ell_ * ell_); }

private:
    Scalar ell_;
};
using Bandwidth = BandwidthT<double>;

/// Finite discrete probability measure: atoms (rows) with nonnegative weights
/// summing to one.
template <typename Scalar>
class WeightedMeasureT {
public:
    WeightedMeasureT(PointsT<Scalar> atoms, VectorT<Scalar> weights)
        : atoms_(std::move(atoms)), weights_(std::move(weights)) {
        if (atoms_.rows() < 1 || atoms_.cols() < 1)
            throw InvalidArgument("measure needs at least one atom of dimension >= 1");
        if (weights_.size() != atoms_.rows())
            throw InvalidArgument("one weight per atom required");
        if ((weights_.array() < Scalar(0)).any())
            throw InvalidArgument("weights must be nonnegative");
        if (std::abs(double(weights_.sum()) - 1.0) > 1e-12)
            throw InvalidArgument("weights must sum to one");
    }

    static WeightedMeasureT uniform(PointsT<Scalar> atoms) {
        const auto n = atoms.rows();
        if (n < 1) throw InvalidArgument("measure needs at least one atom");
        return WeightedMeasureT(std::move(atoms), VectorT<Scalar>::Constant(n, Scalar(1) / Scalar(n)));
    }

    const PointsT<Scalar>& atoms() const { return atoms_; }
    const VectorT<Scalar>& weights() const { return weights_; }
    Eigen::Index size() const { return atoms_.rows(); }
    Eigen::Index dim() const { return atoms_.cols(); }

private:
    PointsT<Scalar> atoms_;
    VectorT<Scalar> weights_;
};
using WeightedMeasure = WeightedMeasureT<double>;

namespace detail {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar squared_distance(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b) {
    typename DerivedA::Scalar acc(0);
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const auto d = a(k) - b(k);
        acc += d * d;
    }
    return acc;
}

} // namespace detail

/// ell = sqrt(median of pairwise squared distances / 2). Even counts take the
/// mean of the two central order statistics.
template <typename Derived>
BandwidthT<typename Derived::Scalar> median_heuristic(const Eigen::MatrixBase<Derived>& data) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index n = data.rows();
    if (n < 2) throw InvalidArgument("median heuristic needs at least two points");
    std::vector<Scalar> sq;
    sq.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            sq.push_back(detail::squared_distance(data.row(i), data.row(j)));
    const std::size_t m = sq.size();
    const std::size_t mid = m / 2;
    std::nth_element(sq.begin(), sq.begin() + mid, sq.end());
    Scalar med = sq[mid];
    if (m % 2 == 0) {
        const Scalar lower = *std::max_element(sq.begin(), sq.begin() + mid);
        med = (lower + med) / Scalar(2);
    }
    if (!(med > Scalar(0))) {
        // A zero median with distinct points still leaves no usable scale.
        throw DegenerateData();
    }
    return BandwidthT<Scalar>(std::sqrt(med / Scalar(2)));
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kernel_eval(const Eigen::MatrixBase<DerivedA>& x,
                                      const Eigen::MatrixBase<DerivedB>& y,
                                      const BandwidthT<typename DerivedA::Scalar>& bw) {
    if (x.size() != y.size()) throw InvalidArgument("dimension mismatch");
    using std::exp;
    return exp(-detail::squared_distance(x, y) * bw.inv_two_ell_sq());
}

/// entries(i, j) = k(A_i, B_j).
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
gram(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& B,
     const BandwidthT<typename DerivedA::Scalar>& bw) {
    using Scalar = typename DerivedA::Scalar;
    if (A.rows() == 0 || B.rows() == 0) throw InvalidArgument("gram of an empty point list");
    if (A.cols() != B.cols()) throw InvalidArgument("dimension mismatch");
    const Scalar c = bw.inv_two_ell_sq();
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> K(A.rows(), B.rows());
    using std::exp;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j)
            K(i, j) = exp(-detail::squared_distance(A.row(i), B.row(j)) * c);
    return K;
}

/// <mu_P, mu_Q> in the RKHS, i.e. sum_ij p_i q_j k(a_i, b_j).
template <typename Scalar>
Scalar embedding_inner(const WeightedMeasureT<Scalar>& P, const WeightedMeasureT<Scalar>& Q,
                       const BandwidthT<Scalar>& bw) {
    if (P.dim() != Q.dim()) throw InvalidArgument("dimension mismatch");
    const Scalar c = bw.inv_two_ell_sq();
    const auto& a = P.atoms();
    const auto& b = Q.atoms();
    const auto& wp = P.weights();
    const auto& wq = Q.weights();
    using std::exp;
    Scalar total(0);
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        Scalar row(0);
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            row += wq(j) * exp(-detail::squared_distance(a.row(i), b.row(j)) * c);
        total += wp(i) * row;
    }
    return total;
}

/// Squared MMD from precomputed embedding inner products; clamps round-off.
template <typename Scalar>
Scalar mmd_sq_from_inner(Scalar pp, Scalar pq, Scalar qq) {
    const Scalar v = pp - Scalar(2) * pq + qq;
    if (v < Scalar(-1e-10))
        throw InternalConsistency("squared MMD is negative beyond round-off: " + std::to_string(double(v)));
    return v < Scalar(0) ? Scalar(0) : v;
}

/// Exact (V-statistic) squared MMD between two discrete measures.
template <typename Scalar>
Scalar mmd_sq(const WeightedMeasureT<Scalar>& P, const WeightedMeasureT<Scalar>& Q,
              const BandwidthT<Scalar>& bw) {
    if (P.dim() != Q.dim()) throw InvalidArgument("dimension mismatch");
    return mmd_sq_from_inner(embedding_inner(P, P, bw), embedding_inner(P, Q, bw),
                             embedding_inner(Q, Q, bw));
}

template <typename Scalar>
Scalar mmd(const WeightedMeasureT<Scalar>& P, const WeightedMeasureT<Scalar>& Q,
           const BandwidthT<Scalar>& bw) {
    using std::sqrt;
    return sqrt(mmd_sq(P, Q, bw));
}

/// Caches <mu_R, mu_R> for a fixed reference so repeated distances to large
/// reference samples cost O(|P| |R|) instead of O(|R|^2).
template <typename Scalar>
class ReferenceEmbeddingT {
public:
    ReferenceEmbeddingT(WeightedMeasureT<Scalar> ref, BandwidthT<Scalar> bw)
        : ref_(std::move(ref)), bw_(bw), self_(embedding_inner(ref_, ref_, bw_)) {}

    Scalar mmd_sq_to(const WeightedMeasureT<Scalar>& P) const {
        return mmd_sq_from_inner(embedding_inner(P, P, bw_), embedding_inner(P, ref_, bw_), self_);
    }
    Scalar mmd_to(const WeightedMeasureT<Scalar>& P) const {
        using std::sqrt;
        return sqrt(mmd_sq_to(P));
    }
    const WeightedMeasureT<Scalar>& measure() const { return ref_; }
    const BandwidthT<Scalar>& bandwidth() const { return bw_; }

private:
    WeightedMeasureT<Scalar> ref_;
    BandwidthT<Scalar> bw_;
    Scalar self_;
};
using ReferenceEmbedding = ReferenceEmbeddingT<double>;

} // namespace robas
