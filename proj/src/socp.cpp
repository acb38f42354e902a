#include "robas/socp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "robas/error.hpp"

namespace robas::socp {

Eigen::Index ConeDims::total() const {
    Eigen::Index n = linear;
    for (auto q : soc) n += q;
    return n;
}

Eigen::Index ConeDims::degree() const {
    return linear + static_cast<Eigen::Index>(soc.size());
}

void ConeProgram::validate() const {
    const Eigen::Index n = c.size();
    if (G.cols() != n || A.cols() != n) throw InvalidArgument("cone program: column count mismatch");
    if (G.rows() != h.size() || A.rows() != b.size()) throw InvalidArgument("cone program: row count mismatch");
    if (cones.total() != G.rows()) throw InvalidArgument("cone program: cone sizes do not cover G");
    for (auto q : cones.soc)
        if (q < 1) throw InvalidArgument("cone program: empty second-order cone");
}

std::string_view to_string(Status status) {
    switch (status) {
    case Status::Optimal: return "optimal";
    case Status::MaxIterations: return "max_iterations";
    case Status::PrimalInfeasible: return "primal_infeasible";
    case Status::DualInfeasible: return "dual_infeasible";
    case Status::NumericalFailure: return "numerical_failure";
    }
    return "unknown";
}

namespace cones {

Eigen::VectorXd identity(const ConeDims& dims) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dims.total());
    e.head(dims.linear).setOnes();
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        e(off) = 1.0;
        off += q;
    }
    return e;
}

Eigen::VectorXd product(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ConeDims& dims) {
    Eigen::VectorXd out(u.size());
    out.head(dims.linear) = u.head(dims.linear).cwiseProduct(v.head(dims.linear));
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        const auto uu = u.segment(off, q);
        const auto vv = v.segment(off, q);
        out(off) = uu.dot(vv);
        out.segment(off + 1, q - 1) = uu(0) * vv.tail(q - 1) + vv(0) * uu.tail(q - 1);
        off += q;
    }
    return out;
}

Eigen::VectorXd divide(const Eigen::VectorXd& lambda, const Eigen::VectorXd& d, const ConeDims& dims) {
    Eigen::VectorXd out(d.size());
    out.head(dims.linear) = d.head(dims.linear).cwiseQuotient(lambda.head(dims.linear));
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        const auto l = lambda.segment(off, q);
        const auto dd = d.segment(off, q);
        const double l0 = l(0);
        const double det = l0 * l0 - l.tail(q - 1).squaredNorm();
        const double x0 = (l0 * dd(0) - l.tail(q - 1).dot(dd.tail(q - 1))) / det;
        out(off) = x0;
        out.segment(off + 1, q - 1) = (dd.tail(q - 1) - x0 * l.tail(q - 1)) / l0;
        off += q;
    }
    return out;
}

double max_step(const Eigen::VectorXd& u, const Eigen::VectorXd& du, const ConeDims& dims) {
    double alpha = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < dims.linear; ++i)
        if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        const double u0 = u(off);
        const double d0 = du(off);
        const auto u1 = u.segment(off + 1, q - 1);
        const auto d1 = du.segment(off + 1, q - 1);
        // f(a) = (u0 + a d0)^2 - ||u1 + a d1||^2 = c + 2 b a + a2 a^2, f(0) > 0.
        const double a2 = d0 * d0 - d1.squaredNorm();
        const double b = u0 * d0 - u1.dot(d1);
        const double c = std::max(u0 * u0 - u1.squaredNorm(), 0.0);
        const double disc = b * b - a2 * c;
        double step = std::numeric_limits<double>::infinity();
        if (a2 < 0.0 || (b < 0.0 && disc >= 0.0)) {
            const double denom = -b + std::sqrt(std::max(disc, 0.0));
            step = denom > 0.0 ? c / denom : 0.0;
        }
        // Guard the sign of the first coordinate as well.
        if (d0 < 0.0) step = std::min(step, -u0 / d0);
        alpha = std::min(alpha, step);
        off += q;
    }
    return alpha;
}

double boundary_shift(const Eigen::VectorXd& u, const ConeDims& dims) {
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < dims.linear; ++i) shift = std::max(shift, -u(i));
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        shift = std::max(shift, u.segment(off + 1, q - 1).norm() - u(off));
        off += q;
    }
    return shift;
}

Scaling::Scaling(const Eigen::VectorXd& s, const Eigen::VectorXd& z, const ConeDims& dims) : dims_(dims) {
    lp_ = (s.head(dims.linear).array() / z.head(dims.linear).array()).sqrt();
    Eigen::Index off = dims.linear;
    for (auto q : dims.soc) {
        const auto ss = s.segment(off, q);
        const auto zz = z.segment(off, q);
        const double s_norm = std::sqrt(std::max(ss(0) * ss(0) - ss.tail(q - 1).squaredNorm(), 1e-300));
        const double z_norm = std::sqrt(std::max(zz(0) * zz(0) - zz.tail(q - 1).squaredNorm(), 1e-300));
        const Eigen::VectorXd sb = ss / s_norm;
        const Eigen::VectorXd zb = zz / z_norm;
        const double gamma = std::sqrt(std::max((1.0 + sb.dot(zb)) / 2.0, 1e-300));
        Eigen::VectorXd w(q);
        w(0) = (sb(0) + zb(0)) / (2.0 * gamma);
        w.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
        soc_.push_back({std::sqrt(s_norm / z_norm), std::move(w)});
        off += q;
    }
    lambda_ = apply(z);
}

Eigen::VectorXd Scaling::apply(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(v.size());
    out.head(dims_.linear) = lp_.cwiseProduct(v.head(dims_.linear));
    Eigen::Index off = dims_.linear;
    for (std::size_t k = 0; k < soc_.size(); ++k) {
        const auto q = dims_.soc[k];
        const auto& [eta, w] = soc_[k];
        const auto vv = v.segment(off, q);
        const double w1v1 = w.tail(q - 1).dot(vv.tail(q - 1));
        out(off) = eta * (w(0) * vv(0) + w1v1);
        out.segment(off + 1, q - 1) = eta * (vv.tail(q - 1) + (vv(0) + w1v1 / (1.0 + w(0))) * w.tail(q - 1));
        off += q;
    }
    return out;
}

Eigen::VectorXd Scaling::apply_inverse(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(v.size());
    out.head(dims_.linear) = v.head(dims_.linear).cwiseQuotient(lp_);
    Eigen::Index off = dims_.linear;
    for (std::size_t k = 0; k < soc_.size(); ++k) {
        const auto q = dims_.soc[k];
        const auto& [eta, w] = soc_[k];
        const auto vv = v.segment(off, q);
        const double w1v1 = w.tail(q - 1).dot(vv.tail(q - 1));
        out(off) = (w(0) * vv(0) - w1v1) / eta;
        out.segment(off + 1, q - 1) = (vv.tail(q - 1) + (-vv(0) + w1v1 / (1.0 + w(0))) * w.tail(q - 1)) / eta;
        off += q;
    }
    return out;
}

SparseMatrix Scaling::squared() const {
    const Eigen::Index m = dims_.total();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(dims_.linear));
    for (Eigen::Index i = 0; i < dims_.linear; ++i) trip.emplace_back(i, i, lp_(i) * lp_(i));
    Eigen::Index off = dims_.linear;
    for (std::size_t k = 0; k < soc_.size(); ++k) {
        const auto q = dims_.soc[k];
        const auto& [eta, w] = soc_[k];
        Eigen::MatrixXd wm(q, q);
        wm(0, 0) = w(0);
        wm.block(0, 1, 1, q - 1) = w.tail(q - 1).transpose();
        wm.block(1, 0, q - 1, 1) = w.tail(q - 1);
        wm.block(1, 1, q - 1, q - 1) = Eigen::MatrixXd::Identity(q - 1, q - 1) +
                                       w.tail(q - 1) * w.tail(q - 1).transpose() / (1.0 + w(0));
        wm *= eta;
        const Eigen::MatrixXd block = wm * wm;
        for (Eigen::Index i = 0; i < q; ++i)
            for (Eigen::Index j = 0; j < q; ++j) trip.emplace_back(off + i, off + j, block(i, j));
        off += q;
    }
    SparseMatrix D(m, m);
    D.setFromTriplets(trip.begin(), trip.end());
    return D;
}

} // namespace cones

namespace {

using cones::Scaling;

// Solves  [0  A^T  G^T ] [dx]   [r1]
//         [A   0    0  ] [dy] = [r2]
//         [G   0  -W^2 ] [dz]   [r3]
// with a sparse LDL^T of the statically regularized (quasi-definite) matrix,
// followed by iterative refinement against the unregularized one.
class KktSolver {
public:
    explicit KktSolver(const ConeProgram& p) : p_(p), n_(p.c.size()), pe_(p.A.rows()), m_(p.G.rows()) {}

    // W == nullptr means identity scaling.
    bool factor(const Scaling* W) {
        W2_ = W ? W->squared() : identity_scaling();
        const Eigen::Index N = n_ + pe_ + m_;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(N + 2 * (p_.A.nonZeros() + p_.G.nonZeros()) + W2_.nonZeros()));
        for (Eigen::Index i = 0; i < n_; ++i) trip.emplace_back(i, i, delta);
        for (Eigen::Index i = 0; i < pe_; ++i) trip.emplace_back(n_ + i, n_ + i, -delta);
        for (Eigen::Index k = 0; k < p_.A.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(p_.A, k); it; ++it) {
                trip.emplace_back(n_ + it.row(), it.col(), it.value());
                trip.emplace_back(it.col(), n_ + it.row(), it.value());
            }
        const Eigen::Index zo = n_ + pe_;
        for (Eigen::Index k = 0; k < p_.G.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(p_.G, k); it; ++it) {
                trip.emplace_back(zo + it.row(), it.col(), it.value());
                trip.emplace_back(it.col(), zo + it.row(), it.value());
            }
        for (Eigen::Index k = 0; k < W2_.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(W2_, k); it; ++it)
                trip.emplace_back(zo + it.row(), zo + it.col(), -it.value() - (it.row() == it.col() ? delta : 0.0));
        K_.resize(N, N);
        K_.setFromTriplets(trip.begin(), trip.end());
        // The block structure, and hence the fill pattern, never changes.
        if (!analyzed_) {
            ldlt_.analyzePattern(K_);
            analyzed_ = true;
        }
        ldlt_.factorize(K_);
        return ldlt_.info() == Eigen::Success;
    }

    void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, const Eigen::VectorXd& r3,
               Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz, int refine) const {
        Eigen::VectorXd r(n_ + pe_ + m_);
        r << r1, r2, r3;
        Eigen::VectorXd u = ldlt_.solve(r);
        const double rnorm = 1.0 + r.lpNorm<Eigen::Infinity>();
        double err = residual_norm(r, u);
        for (int it = 0; it < refine && err > 1e-15 * rnorm; ++it) {
            const Eigen::VectorXd e = r - unregularized(u);
            const Eigen::VectorXd cand = u + ldlt_.solve(e);
            const double cand_err = residual_norm(r, cand);
            if (!(cand_err < err)) break;
            u = cand;
            err = cand_err;
        }
        dx = u.head(n_);
        dy = u.segment(n_, pe_);
        dz = u.tail(m_);
    }

private:
    static constexpr double delta = 1e-9;

    SparseMatrix identity_scaling() const {
        // Same pattern as a real scaling: dense blocks for each cone.
        std::vector<Eigen::Triplet<double>> trip;
        for (Eigen::Index i = 0; i < p_.cones.linear; ++i) trip.emplace_back(i, i, 1.0);
        Eigen::Index off = p_.cones.linear;
        for (auto q : p_.cones.soc) {
            for (Eigen::Index i = 0; i < q; ++i)
                for (Eigen::Index j = 0; j < q; ++j) trip.emplace_back(off + i, off + j, i == j ? 1.0 : 0.0);
            off += q;
        }
        SparseMatrix I(m_, m_);
        I.setFromTriplets(trip.begin(), trip.end());
        return I;
    }

    Eigen::VectorXd unregularized(const Eigen::VectorXd& u) const {
        Eigen::VectorXd out = K_.selfadjointView<Eigen::Lower>() * u;
        out.head(n_) -= delta * u.head(n_);
        out.tail(pe_ + m_) += delta * u.tail(pe_ + m_);
        return out;
    }

    double residual_norm(const Eigen::VectorXd& r, const Eigen::VectorXd& u) const {
        return (r - unregularized(u)).lpNorm<Eigen::Infinity>();
    }

    const ConeProgram& p_;
    Eigen::Index n_, pe_, m_;
    SparseMatrix W2_;
    SparseMatrix K_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    bool analyzed_ = false;
};

struct Iterate {
    Eigen::VectorXd x, y, z, s;
    double tau = 1.0, kappa = 1.0;
};

struct Residuals {
    double pres, dres, gap_rel, pcost, dcost;
    double worst() const { return std::max({pres, dres, gap_rel}); }
};

Residuals measure(const ConeProgram& p, const Iterate& it, double hnorm, double bnorm, double cnorm) {
    const double t = it.tau;
    const Eigen::VectorXd rz = (it.s + p.G * it.x - p.h * t) / t;
    const Eigen::VectorXd ry = (p.A * it.x - p.b * t) / t;
    const Eigen::VectorXd rx = (p.A.transpose() * it.y + p.G.transpose() * it.z + p.c * t) / t;
    Residuals r{};
    r.pres = rz.norm() / (1.0 + hnorm);
    if (ry.size() > 0) r.pres = std::max(r.pres, ry.norm() / (1.0 + bnorm));
    r.dres = rx.norm() / (1.0 + cnorm);
    r.pcost = p.c.dot(it.x) / t;
    r.dcost = -(p.h.dot(it.z) + p.b.dot(it.y)) / t;
    const double gap = it.s.dot(it.z) / (t * t);
    r.gap_rel = std::abs(gap) / (1.0 + std::abs(r.pcost));
    return r;
}

Result finish(const ConeProgram& p, const Iterate& it, const Residuals& r, Status status, int iters) {
    Result out;
    out.status = status;
    out.x = it.x / it.tau;
    out.y = it.y / it.tau;
    out.z = it.z / it.tau;
    out.s = it.s / it.tau;
    out.primal_objective = p.c.dot(out.x);
    out.dual_objective = -(p.h.dot(out.z) + p.b.dot(out.y));
    out.iterations = iters;
    out.primal_residual = r.pres;
    out.dual_residual = r.dres;
    out.gap_residual = r.gap_rel;
    return out;
}

} // namespace

Result solve(const ConeProgram& p, const Settings& settings) {
    p.validate();
    const ConeDims& dims = p.cones;
    const Eigen::Index n = p.c.size();
    const Eigen::Index pe = p.A.rows();
    const double hnorm = p.h.norm();
    const double bnorm = p.b.norm();
    const double cnorm = p.c.norm();
    const double degree = double(dims.degree());
    const Eigen::VectorXd e = cones::identity(dims);

    KktSolver kkt(p);
    Iterate it;

    // Starting point from the W = I least-squares systems.
    if (!kkt.factor(nullptr)) return Result{};
    {
        Eigen::VectorXd dx, dy, dz;
        kkt.solve(Eigen::VectorXd::Zero(n), p.b, p.h, dx, dy, dz, settings.refine_steps);
        it.x = dx;
        it.s = -dz;
        const double shift = cones::boundary_shift(it.s, dims);
        if (shift >= -1e-8 * std::max(1.0, it.s.norm())) it.s += (1.0 + std::max(shift, 0.0)) * e;
        kkt.solve(-p.c, Eigen::VectorXd::Zero(pe), Eigen::VectorXd::Zero(p.h.size()), dx, dy, dz,
                  settings.refine_steps);
        it.y = dy;
        it.z = dz;
        const double zshift = cones::boundary_shift(it.z, dims);
        if (zshift >= -1e-8 * std::max(1.0, it.z.norm())) it.z += (1.0 + std::max(zshift, 0.0)) * e;
    }

    Iterate best = it;
    Residuals best_res = measure(p, it, hnorm, bnorm, cnorm);
    int best_iter = 0;
    int iter = 0;
    Status status = Status::MaxIterations;

    for (iter = 0; iter <= settings.max_iter; ++iter) {
        const Residuals res = measure(p, it, hnorm, bnorm, cnorm);
        if (!std::isfinite(res.worst())) {
            status = Status::NumericalFailure;
            break;
        }
        if (res.worst() < best_res.worst()) {
            best = it;
            best_res = res;
            best_iter = iter;
        }
        if (res.pres <= settings.feas_tol && res.dres <= settings.feas_tol && res.gap_rel <= settings.gap_tol) {
            status = Status::Optimal;
            break;
        }
        // Infeasibility certificates of the embedding (tau -> 0).
        const double hz_by = p.h.dot(it.z) + p.b.dot(it.y);
        if (hz_by < 0.0 && it.tau < 1e-6 * it.kappa) {
            const double r = (p.G.transpose() * it.z + p.A.transpose() * it.y).norm() / -hz_by;
            if (r < settings.feas_tol) {
                status = Status::PrimalInfeasible;
                break;
            }
        }
        const double cx = p.c.dot(it.x);
        if (cx < 0.0 && it.tau < 1e-6 * it.kappa) {
            const double r = std::max((p.G * it.x + it.s).norm(), (p.A * it.x).norm()) / -cx;
            if (r < settings.feas_tol) {
                status = Status::DualInfeasible;
                break;
            }
        }
        if (iter == settings.max_iter) break;

        const Scaling W(it.s, it.z, dims);
        if (!kkt.factor(&W)) {
            status = Status::NumericalFailure;
            break;
        }
        const Eigen::VectorXd& lambda = W.lambda();
        const double mu = (it.s.dot(it.z) + it.tau * it.kappa) / (degree + 1.0);

        const Eigen::VectorXd rx = p.A.transpose() * it.y + p.G.transpose() * it.z + p.c * it.tau;
        const Eigen::VectorXd ry = p.b * it.tau - p.A * it.x;
        const Eigen::VectorXd rz = it.s + p.G * it.x - p.h * it.tau;
        const double rt = it.kappa + p.c.dot(it.x) + p.b.dot(it.y) + p.h.dot(it.z);

        Eigen::VectorXd u1x, u1y, u1z;
        kkt.solve(-p.c, p.b, p.h, u1x, u1y, u1z, settings.refine_steps);
        const double qu1 = p.c.dot(u1x) + p.b.dot(u1y) + p.h.dot(u1z);

        struct Direction {
            Eigen::VectorXd dx, dy, dz, ds;
            double dtau, dkappa;
        };
        auto direction = [&](double sigma, const Eigen::VectorXd& d_s, double d_kappa) {
            Direction d;
            const double keep = 1.0 - sigma;
            const Eigen::VectorXd ld = cones::divide(lambda, d_s, dims);
            Eigen::VectorXd vx, vy, vz;
            kkt.solve(-keep * rx, keep * ry, -keep * rz - W.apply(ld), vx, vy, vz, settings.refine_steps);
            const double qu2 = p.c.dot(vx) + p.b.dot(vy) + p.h.dot(vz);
            d.dtau = (-keep * rt - d_kappa / it.tau - qu2) / (qu1 - it.kappa / it.tau);
            d.dx = vx + d.dtau * u1x;
            d.dy = vy + d.dtau * u1y;
            d.dz = vz + d.dtau * u1z;
            // From the linearized primal row; avoids amplifying dz errors through W^2.
            d.ds = -keep * rz - p.G * d.dx + p.h * d.dtau;
            d.dkappa = (d_kappa - it.kappa * d.dtau) / it.tau;
            return d;
        };
        auto step_length = [&](const Direction& d) {
            double a = std::min(cones::max_step(it.s, d.ds, dims), cones::max_step(it.z, d.dz, dims));
            if (d.dtau < 0.0) a = std::min(a, -it.tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -it.kappa / d.dkappa);
            return a;
        };

        // Predictor.
        const Eigen::VectorXd ll = cones::product(lambda, lambda, dims);
        const Direction aff = direction(0.0, -ll, -it.tau * it.kappa);
        const double a_aff = std::min(1.0, step_length(aff));
        const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

        // Corrector.
        const Eigen::VectorXd corr =
            cones::product(W.apply_inverse(aff.ds), W.apply(aff.dz), dims);
        const Direction dir = direction(sigma, -ll - corr + sigma * mu * e,
                                        -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu);
        const double a_max = step_length(dir);
        const double alpha = std::min(1.0, settings.step_fraction * a_max);
        if (!(alpha > 1e-12) || !dir.dx.allFinite()) {
            status = Status::NumericalFailure;
            break;
        }
        it.x += alpha * dir.dx;
        it.y += alpha * dir.dy;
        it.z += alpha * dir.dz;
        it.s += alpha * dir.ds;
        it.tau += alpha * dir.dtau;
        it.kappa += alpha * dir.dkappa;
    }

    if (status == Status::Optimal || status == Status::PrimalInfeasible || status == Status::DualInfeasible) {
        return finish(p, it, measure(p, it, hnorm, bnorm, cnorm), status, iter);
    }
    // Stalled or out of iterations: report the best iterate seen.
    const Status final_status = best_res.worst() <= settings.accept_tol ? Status::Optimal : status;
    return finish(p, best, best_res, final_status, std::max(iter, best_iter));
}

} // namespace robas::socp
