#include "robas/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "robas/error.hpp"

namespace robas {

std::string_view to_string(ProblemKind kind) {
    return kind == ProblemKind::Newsvendor ? "newsvendor" : "portfolio";
}

ProblemKind parse_problem_kind(std::string_view name) {
    if (name == "newsvendor") return ProblemKind::Newsvendor;
    if (name == "portfolio") return ProblemKind::Portfolio;
    throw InvalidArgument("unknown problem '" + std::string(name) + "'");
}

Problem Problem::newsvendor(Eigen::Index dim, double backorder, double holding) {
    if (dim < 1) throw InvalidArgument("problem dimension must be >= 1");
    if (!(backorder > 0.0) || !(holding > 0.0)) throw InvalidArgument("newsvendor costs b, h must be positive");
    return Problem(ProblemKind::Newsvendor, dim, backorder, holding);
}

Problem Problem::portfolio(Eigen::Index dim) {
    if (dim < 1) throw InvalidArgument("problem dimension must be >= 1");
    return Problem(ProblemKind::Portfolio, dim, 0.0, 0.0);
}

PieceGroup newsvendor_pieces(double xi, double backorder, double holding) {
    PieceGroup g(2);
    g[0] = {Eigen::VectorXd::Constant(1, holding), -holding * xi};
    g[1] = {Eigen::VectorXd::Constant(1, -backorder), backorder * xi};
    return g;
}

PieceGroup portfolio_pieces(const Eigen::Ref<const Eigen::VectorXd>& xi) {
    return {AffinePiece{-xi, 0.0}};
}

std::vector<PieceGroup> Problem::piece_groups(const Eigen::Ref<const Eigen::VectorXd>& xi) const {
    if (xi.size() != dim_) throw InvalidArgument("scenario dimension mismatch");
    if (kind_ == ProblemKind::Portfolio) return {portfolio_pieces(xi)};
    std::vector<PieceGroup> groups;
    groups.reserve(static_cast<std::size_t>(dim_));
    for (Eigen::Index d = 0; d < dim_; ++d) {
        PieceGroup g = newsvendor_pieces(xi(d), b_, h_);
        // Lift the scalar coefficient onto coordinate d of x.
        for (auto& piece : g) {
            Eigen::VectorXd a = Eigen::VectorXd::Zero(dim_);
            a(d) = piece.a(0);
            piece.a = std::move(a);
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

double Problem::cost_from_pieces(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& xi) const {
    double total = 0.0;
    for (const auto& group : piece_groups(xi)) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& piece : group) best = std::max(best, piece.a.dot(x) + piece.b);
        total += best;
    }
    return total;
}

double Problem::cost(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xi) const {
    if (x.size() != dim_ || xi.size() != dim_) throw InvalidArgument("dimension mismatch");
    if (!is_feasible(x)) throw InvalidArgument("decision violates its constraints");
    if (kind_ == ProblemKind::Portfolio) return -xi.dot(x);
    double total = 0.0;
    for (Eigen::Index d = 0; d < dim_; ++d)
        total += h_ * std::max(x(d) - xi(d), 0.0) + b_ * std::max(xi(d) - x(d), 0.0);
    return total;
}

bool Problem::is_feasible(const Eigen::Ref<const Eigen::VectorXd>& x, double tol) const {
    if (x.size() != dim_ || !x.allFinite()) return false;
    if ((x.array() < -tol).any()) return false;
    if (kind_ == ProblemKind::Portfolio && std::abs(x.sum() - 1.0) > tol) return false;
    return true;
}

Eigen::VectorXd project_simplex(const Eigen::Ref<const Eigen::VectorXd>& v) {
    // Sort-based projection onto {x >= 0, sum x = 1}.
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cumsum += u[k];
        const double t = (cumsum - 1.0) / double(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    Eigen::VectorXd x = (v.array() - theta).max(0.0);
    const double s = x.sum();
    if (s > 0.0) x /= s;
    return x;
}

Eigen::VectorXd Problem::project(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (kind_ == ProblemKind::Portfolio) return project_simplex(x);
    return x.cwiseMax(0.0);
}

std::string Problem::describe() const {
    std::ostringstream os;
    os << to_string(kind_) << "(dim=" << dim_;
    if (kind_ == ProblemKind::Newsvendor) os << ", b=" << b_ << ", h=" << h_;
    os << ")";
    return os.str();
}

} // namespace robas
