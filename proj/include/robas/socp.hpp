// Primal-dual interior-point solver for second-order cone programs
//
//     minimize    c^T x
//     subject to  G x + s = h,  A x = b,  s in K
//
// where K is a product of a nonnegative orthant (first `linear` rows of G)
// followed by second-order cones {(t, u) : t >= ||u||}. The dual is
//
//     maximize    -h^T z - b^T y
//     subject to  G^T z + A^T y + c = 0,  z in K.
//
// The iteration runs on the homogeneous self-dual embedding with
// Nesterov-Todd scaling and a Mehrotra predictor-corrector step. Newton
// systems are reduced to sparse normal equations and polished by iterative
// refinement against the unregularized KKT matrix.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <string_view>
#include <vector>

namespace robas::socp {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct ConeDims {
    Eigen::Index linear = 0;
    std::vector<Eigen::Index> soc;

    Eigen::Index total() const;
    /// Barrier degree: one per orthant row, one per cone.
    Eigen::Index degree() const;
};

struct ConeProgram {
    Eigen::VectorXd c;
    SparseMatrix G;
    Eigen::VectorXd h;
    SparseMatrix A;  // may have zero rows
    Eigen::VectorXd b;
    ConeDims cones;

    void validate() const;
};

struct Settings {
    double feas_tol = 1e-9;
    double gap_tol = 1e-9;
    // Exit residuals at or below this count as solved.
    double accept_tol = 1e-6;
    int max_iter = 200;
    double step_fraction = 0.99;
    int refine_steps = 10;
};

enum class Status { Optimal, MaxIterations, PrimalInfeasible, DualInfeasible, NumericalFailure };

std::string_view to_string(Status status);

struct Result {
    Status status = Status::NumericalFailure;
    Eigen::VectorXd x, y, z, s;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;  // ||Gx + s - h||, ||Ax - b|| relative to 1 + ||h||, 1 + ||b||
    double dual_residual = 0.0;    // ||G^T z + A^T y + c|| / (1 + ||c||)
    double gap_residual = 0.0;     // s^T z / (1 + |c^T x|)
};

Result solve(const ConeProgram& program, const Settings& settings = {});

// Cone algebra, exposed for testing.
namespace cones {

Eigen::VectorXd identity(const ConeDims& dims);
/// Jordan product u o v.
Eigen::VectorXd product(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ConeDims& dims);
/// x with lambda o x = d.
Eigen::VectorXd divide(const Eigen::VectorXd& lambda, const Eigen::VectorXd& d, const ConeDims& dims);
/// Largest a >= 0 with u + a du in K (infinity if unbounded); u in int K.
double max_step(const Eigen::VectorXd& u, const Eigen::VectorXd& du, const ConeDims& dims);
/// Smallest a with u + a e in K.
double boundary_shift(const Eigen::VectorXd& u, const ConeDims& dims);

/// Nesterov-Todd scaling W with W z = W^{-1} s =: lambda.
class Scaling {
public:
    Scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z, const ConeDims& dims);

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;
    const Eigen::VectorXd& lambda() const { return lambda_; }
    /// W^2 as a sparse block-diagonal matrix.
    SparseMatrix squared() const;

private:
    struct SocBlock {
        double eta;
        Eigen::VectorXd w;  // w^T J w = 1
    };
    ConeDims dims_;
    Eigen::VectorXd lp_;  // sqrt(s / z)
    std::vector<SocBlock> soc_;
    Eigen::VectorXd lambda_;
};

} // namespace cones

} // namespace robas::socp
