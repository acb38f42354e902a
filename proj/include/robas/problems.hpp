// Decision problems whose cost is a sum of pointwise maxima of affine
// functions of x:
//
//     f(x, xi) = sum_g max_{l in group g} ( a_l(xi)^T x + b_l(xi) ),
//
// which keeps the worst-case dual jointly convex in (x, g0, g).
#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace robas {

struct AffinePiece {
    Eigen::VectorXd a;
    double b;
};

/// One max-group of affine pieces.
using PieceGroup = std::vector<AffinePiece>;

enum class DecisionSet { Nonnegative, Simplex };

enum class ProblemKind { Newsvendor, Portfolio };

std::string_view to_string(ProblemKind kind);
ProblemKind parse_problem_kind(std::string_view name);

class Problem {
public:
    /// f(x, xi) = sum_d h max(x_d - xi_d, 0) + b max(xi_d - x_d, 0), x >= 0.
    static Problem newsvendor(Eigen::Index dim, double backorder = 8.0, double holding = 3.0);
    /// f(x, xi) = -xi^T x, x on the probability simplex.
    static Problem portfolio(Eigen::Index dim);

    ProblemKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }
    double backorder() const { return b_; }
    double holding() const { return h_; }
    DecisionSet decision_set() const {
        return kind_ == ProblemKind::Portfolio ? DecisionSet::Simplex : DecisionSet::Nonnegative;
    }

    /// Groups summed to give f; a single group means f is one max of pieces.
    std::vector<PieceGroup> piece_groups(const Eigen::Ref<const Eigen::VectorXd>& xi) const;

    /// Exact cost; throws if x violates the decision set.
    double cost(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xi) const;
    /// Cost through the piece representation (no feasibility check).
    double cost_from_pieces(const Eigen::Ref<const Eigen::VectorXd>& x,
                            const Eigen::Ref<const Eigen::VectorXd>& xi) const;

    bool is_feasible(const Eigen::Ref<const Eigen::VectorXd>& x, double tol = 1e-9) const;
    /// Euclidean projection onto the decision set.
    Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    std::string describe() const;

private:
    Problem(ProblemKind kind, Eigen::Index dim, double b, double h) : kind_(kind), dim_(dim), b_(b), h_(h) {}

    ProblemKind kind_;
    Eigen::Index dim_;
    double b_;
    double h_;
};

/// Pieces for a 1-D newsvendor coordinate: {(h, -h xi), (-b, b xi)}.
PieceGroup newsvendor_pieces(double xi, double backorder, double holding);
/// Single piece (-xi, 0).
PieceGroup portfolio_pieces(const Eigen::Ref<const Eigen::VectorXd>& xi);

Eigen::VectorXd project_simplex(const Eigen::Ref<const Eigen::VectorXd>& v);

} // namespace robas
