#include "robas/dro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "robas/error.hpp"

namespace robas {

std::string_view to_string(NominalKind kind) {
    return kind == NominalKind::RoBAS ? "robas" : "empirical";
}

NominalKind parse_nominal_kind(std::string_view name) {
    if (name == "robas") return NominalKind::RoBAS;
    if (name == "empirical" || name == "empirical-mmd") return NominalKind::EmpiricalMMD;
    throw InvalidArgument("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(DiscretizationStrategy s) {
    switch (s) {
    case DiscretizationStrategy::Auto: return "auto";
    case DiscretizationStrategy::Grid: return "grid";
    case DiscretizationStrategy::Resample: return "resample";
    }
    return "unknown";
}

DiscretizationStrategy parse_strategy(std::string_view name) {
    if (name == "auto") return DiscretizationStrategy::Auto;
    if (name == "grid") return DiscretizationStrategy::Grid;
    if (name == "resample") return DiscretizationStrategy::Resample;
    throw InvalidArgument("unknown discretization strategy '" + std::string(name) + "'");
}

NominalSpec NominalSpec::robas(Points predictive_pool, Points data) {
    if (predictive_pool.rows() < 1) throw InvalidArgument("empty predictive pool");
    if (data.cols() != predictive_pool.cols()) throw InvalidArgument("pool and data dimensions differ");
    return {NominalKind::RoBAS, std::move(predictive_pool), std::move(data)};
}

NominalSpec NominalSpec::empirical(Points data) {
    if (data.rows() < 1) throw InvalidArgument("empty data");
    Points copy = data;
    return {NominalKind::EmpiricalMMD, std::move(data), std::move(copy)};
}

Points discretization_points(const NominalSpec& nominal, Eigen::Index m, DiscretizationStrategy strategy,
                             Rng& rng) {
    if (m < 1) throw InvalidArgument("need at least one discretization point");
    const Points& pts = nominal.points;
    const Eigen::Index D = pts.cols();
    if (strategy == DiscretizationStrategy::Auto)
        strategy = D == 1 ? DiscretizationStrategy::Grid : DiscretizationStrategy::Resample;

    if (strategy == DiscretizationStrategy::Grid) {
        if (D != 1) throw InvalidArgument("grid discretization is only available in one dimension");
        const double lo = pts.minCoeff();
        const double hi = pts.maxCoeff();
        const double range = hi - lo;
        const double a = lo - 0.25 * range;
        const double b = hi + 0.25 * range;
        Points zeta(m, 1);
        if (m == 1) {
            zeta(0, 0) = 0.5 * (a + b);
        } else {
            for (Eigen::Index j = 0; j < m; ++j) zeta(j, 0) = a + (b - a) * double(j) / double(m - 1);
        }
        return zeta;
    }

    Points candidates = pts;
    if (nominal.kind == NominalKind::RoBAS && nominal.data.rows() > 0) {
        candidates.resize(pts.rows() + nominal.data.rows(), D);
        candidates << pts, nominal.data;
    }
    const Eigen::Index C = candidates.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(C));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    Points zeta(m, D);
    std::uniform_int_distribution<Eigen::Index> pick(0, C - 1);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index src = j < C ? order[static_cast<std::size_t>(j)] : pick(rng);
        zeta.row(j) = candidates.row(src);
    }
    return zeta;
}

PivotedCholesky pivoted_cholesky(const Eigen::MatrixXd& K, double tol) {
    const Eigen::Index n = K.rows();
    if (K.cols() != n || n == 0) throw InvalidArgument("pivoted Cholesky needs a nonempty square matrix");
    if (!K.allFinite()) throw SolverFailure("gram not factorizable");
    Eigen::VectorXd resid = K.diagonal();
    if (resid.minCoeff() < -tol) throw SolverFailure("gram not factorizable");
    PivotedCholesky out;
    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = 0;
        const double dmax = resid.maxCoeff(&p);
        if (dmax <= tol) break;
        Eigen::VectorXd col = K.col(p);
        for (std::size_t q = 0; q < cols.size(); ++q) col -= cols[q] * cols[q](p);
        col /= std::sqrt(dmax);
        // Pivoted rows are exact zeros in later residuals.
        for (auto q : out.pivots) col(q) = 0.0;
        resid -= col.cwiseAbs2();
        resid(p) = 0.0;
        out.pivots.push_back(p);
        cols.push_back(std::move(col));
    }
    if (out.pivots.empty()) throw SolverFailure("gram not factorizable");
    out.L.resize(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t q = 0; q < cols.size(); ++q) out.L.col(static_cast<Eigen::Index>(q)) = cols[q];
    return out;
}

namespace {

std::vector<double> key_of(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    return {row.data(), row.data() + row.size()};
}

} // namespace

Eigen::Index DualProgram::sip_constraint_count() const {
    Eigen::Index rows = 0;
    for (Eigen::Index j = 0; j < num_points(); ++j) {
        const auto groups = problem.piece_groups(all_points.row(j).transpose());
        for (const auto& g : groups) rows += static_cast<Eigen::Index>(g.size());
        if (groups.size() > 1) rows += 1;
    }
    return rows;
}

double DualProgram::saa_cost(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_nominal; ++i) total += problem.cost_from_pieces(x, all_points.row(i).transpose());
    return total / double(n_nominal);
}

DualProgram build_dual(const NominalSpec& nominal, const Points& zeta, double epsilon, const Problem& problem,
                       const Bandwidth& bw, double factor_tol) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("radius epsilon must be >= 0");
    const Points& xi = nominal.points;
    if (xi.rows() < 1) throw InvalidArgument("empty nominal measure");
    if (xi.cols() != problem.dim() || (zeta.rows() > 0 && zeta.cols() != xi.cols()))
        throw InvalidArgument("dimension mismatch between points and problem");

    std::set<std::vector<double>> seen;
    for (Eigen::Index i = 0; i < xi.rows(); ++i) seen.insert(key_of(xi.row(i)));
    std::vector<Eigen::Index> fresh;
    for (Eigen::Index j = 0; j < zeta.rows(); ++j)
        if (seen.insert(key_of(zeta.row(j))).second) fresh.push_back(j);

    Points all(xi.rows() + static_cast<Eigen::Index>(fresh.size()), xi.cols());
    all.topRows(xi.rows()) = xi;
    for (std::size_t k = 0; k < fresh.size(); ++k) all.row(xi.rows() + static_cast<Eigen::Index>(k)) = zeta.row(fresh[k]);

    Eigen::MatrixXd K = gram(all, all, bw);
    PivotedCholesky factor = pivoted_cholesky(K, factor_tol);
    return DualProgram{nominal.kind, problem, bw, std::move(all), xi.rows(), std::move(K), std::move(factor), epsilon};
}

namespace {

struct Layout {
    Eigen::Index d, r, x0, g0, beta0, t, aux0, n;
    Eigen::Index groups;
};

Layout layout_of(const DualProgram& prog) {
    Layout l{};
    l.d = prog.problem.dim();
    l.r = prog.factor.rank();
    l.groups = static_cast<Eigen::Index>(prog.problem.piece_groups(prog.all_points.row(0).transpose()).size());
    l.x0 = 0;
    l.g0 = l.d;
    l.beta0 = l.d + 1;
    Eigen::Index next = l.beta0 + l.r;
    l.t = -1;
    if (prog.epsilon > 0.0) l.t = next++;
    l.aux0 = next;
    if (l.groups > 1) next += prog.num_points() * l.groups;
    l.n = next;
    return l;
}

} // namespace

socp::ConeProgram assemble_cone_program(const DualProgram& prog) {
    const Layout lay = layout_of(prog);
    const Eigen::Index P = prog.num_points();
    const Eigen::MatrixXd& L = prog.factor.L;

    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> h;
    Eigen::Index row = 0;
    auto add_g_row = [&](Eigen::Index j) {
        trip.emplace_back(row, lay.g0, -1.0);
        for (Eigen::Index k = 0; k < lay.r; ++k)
            if (L(j, k) != 0.0) trip.emplace_back(row, lay.beta0 + k, -L(j, k));
    };
    for (Eigen::Index j = 0; j < P; ++j) {
        const auto groups = prog.problem.piece_groups(prog.all_points.row(j).transpose());
        if (lay.groups == 1) {
            for (const auto& piece : groups[0]) {
                for (Eigen::Index i = 0; i < lay.d; ++i)
                    if (piece.a(i) != 0.0) trip.emplace_back(row, lay.x0 + i, piece.a(i));
                add_g_row(j);
                h.push_back(-piece.b);
                ++row;
            }
        } else {
            for (Eigen::Index g = 0; g < lay.groups; ++g) {
                const Eigen::Index aux = lay.aux0 + j * lay.groups + g;
                for (const auto& piece : groups[static_cast<std::size_t>(g)]) {
                    for (Eigen::Index i = 0; i < lay.d; ++i)
                        if (piece.a(i) != 0.0) trip.emplace_back(row, lay.x0 + i, piece.a(i));
                    trip.emplace_back(row, aux, -1.0);
                    h.push_back(-piece.b);
                    ++row;
                }
            }
            for (Eigen::Index g = 0; g < lay.groups; ++g) trip.emplace_back(row, lay.aux0 + j * lay.groups + g, 1.0);
            add_g_row(j);
            h.push_back(0.0);
            ++row;
        }
    }
    for (Eigen::Index i = 0; i < lay.d; ++i) {
        trip.emplace_back(row, lay.x0 + i, -1.0);
        h.push_back(0.0);
        ++row;
    }
    const Eigen::Index linear = row;
    socp::ConeDims dims;
    dims.linear = linear;
    if (lay.t >= 0) {
        trip.emplace_back(row++, lay.t, -1.0);
        h.push_back(0.0);
        for (Eigen::Index k = 0; k < lay.r; ++k) {
            trip.emplace_back(row++, lay.beta0 + k, -1.0);
            h.push_back(0.0);
        }
        dims.soc.push_back(lay.r + 1);
    }

    socp::ConeProgram cp;
    cp.cones = dims;
    cp.G.resize(row, lay.n);
    cp.G.setFromTriplets(trip.begin(), trip.end());
    cp.h = Eigen::Map<const Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    cp.c = Eigen::VectorXd::Zero(lay.n);
    cp.c(lay.g0) = 1.0;
    cp.c.segment(lay.beta0, lay.r) = L.topRows(prog.n_nominal).colwise().mean().transpose();
    if (lay.t >= 0) cp.c(lay.t) = prog.epsilon;
    if (prog.problem.decision_set() == DecisionSet::Simplex) {
        cp.A.resize(1, lay.n);
        std::vector<Eigen::Triplet<double>> at;
        for (Eigen::Index i = 0; i < lay.d; ++i) at.emplace_back(0, lay.x0 + i, 1.0);
        cp.A.setFromTriplets(at.begin(), at.end());
        cp.b = Eigen::VectorXd::Ones(1);
    } else {
        cp.A.resize(0, lay.n);
        cp.b.resize(0);
    }
    return cp;
}

namespace {

Eigen::VectorXd coeffs_from_beta(const DualProgram& prog, const Eigen::VectorXd& beta) {
    const auto& f = prog.factor;
    const Eigen::Index r = f.rank();
    Eigen::MatrixXd Lpp(r, r);
    for (Eigen::Index a = 0; a < r; ++a) Lpp.row(a) = f.L.row(f.pivots[static_cast<std::size_t>(a)]);
    // L(P, :) is lower triangular in pivot order.
    const Eigen::VectorXd alpha_p = Lpp.transpose().triangularView<Eigen::Upper>().solve(beta);
    Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(prog.num_points());
    for (Eigen::Index a = 0; a < r; ++a) coeffs(f.pivots[static_cast<std::size_t>(a)]) = alpha_p(a);
    return coeffs;
}

// Minimizes F(x, beta) = max_p [f(x, p) - (L beta)_p] + mean_i (L beta)_i + eps ||beta||,
// which is the dual with g0 eliminated. Used when the interior-point method fails.
bool subgradient_solve(const DualProgram& prog, int iterations, Eigen::VectorXd& x_out, Eigen::VectorXd& beta_out) {
    const Eigen::Index d = prog.problem.dim();
    const Eigen::Index P = prog.num_points();
    const Eigen::MatrixXd& L = prog.factor.L;
    const Eigen::VectorXd mean_row = L.topRows(prog.n_nominal).colwise().mean().transpose();

    Eigen::VectorXd x = prog.problem.project(prog.all_points.topRows(prog.n_nominal).colwise().mean().transpose());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(L.cols());
    auto objective = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& bv, Eigen::Index& arg) {
        const Eigen::VectorXd g = L * bv;
        double worst = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < P; ++j) {
            const double v = prog.problem.cost_from_pieces(xv, prog.all_points.row(j).transpose()) - g(j);
            if (v > worst) {
                worst = v;
                arg = j;
            }
        }
        return worst + mean_row.dot(bv) + prog.epsilon * bv.norm();
    };
    Eigen::Index arg = 0;
    double best = objective(x, beta, arg);
    x_out = x;
    beta_out = beta;
    const double scale = std::max(1.0, prog.all_points.cwiseAbs().maxCoeff());
    for (int k = 0; k < iterations; ++k) {
        Eigen::Index j = 0;
        const double val = objective(x, beta, j);
        if (val < best) {
            best = val;
            x_out = x;
            beta_out = beta;
        }
        Eigen::VectorXd gx = Eigen::VectorXd::Zero(d);
        for (const auto& group : prog.problem.piece_groups(prog.all_points.row(j).transpose())) {
            const AffinePiece* active = &group.front();
            for (const auto& piece : group)
                if (piece.a.dot(x) + piece.b > active->a.dot(x) + active->b) active = &piece;
            gx += active->a;
        }
        Eigen::VectorXd gb = mean_row - L.row(j).transpose();
        const double bn = beta.norm();
        if (bn > 0.0) gb += prog.epsilon * beta / bn;
        const double gnorm = std::sqrt(gx.squaredNorm() + gb.squaredNorm());
        if (gnorm == 0.0) break;
        const double step = scale / std::sqrt(double(k + 1)) / gnorm;
        x = prog.problem.project(x - step * gx);
        beta -= step * gb;
    }
    return std::isfinite(best);
}

} // namespace

DualSolution solve(const DualProgram& prog, const DroSolverConfig& cfg) {
    const Layout lay = layout_of(prog);
    const socp::ConeProgram cp = assemble_cone_program(prog);
    const socp::Result res = socp::solve(cp, cfg.ipm);

    DualSolution sol;
    Eigen::VectorXd x_raw, beta;
    if (res.status == socp::Status::Optimal) {
        x_raw = res.x.segment(lay.x0, lay.d);
        beta = res.x.segment(lay.beta0, lay.r);
        sol.status = "optimal";
        sol.ok = true;
    } else if (res.status == socp::Status::PrimalInfeasible || res.status == socp::Status::DualInfeasible) {
        // A free g0 makes every instance feasible and bounded.
        throw InternalConsistency("dual program reported " + std::string(socp::to_string(res.status)));
    } else if (cfg.subgradient_fallback && subgradient_solve(prog, cfg.subgradient_iterations, x_raw, beta)) {
        sol.status = "subgradient";
        sol.ok = true;
    } else {
        sol.status = std::string(socp::to_string(res.status));
        sol.ok = false;
        x_raw = res.x.size() ? Eigen::VectorXd(res.x.segment(lay.x0, lay.d)) : Eigen::VectorXd::Zero(lay.d);
        beta = res.x.size() ? Eigen::VectorXd(res.x.segment(lay.beta0, lay.r)) : Eigen::VectorXd::Zero(lay.r);
    }
    sol.iterations = res.iterations;
    sol.primal_residual = res.primal_residual;
    sol.dual_residual = res.dual_residual;
    sol.gap_residual = res.gap_residual;

    sol.x = prog.problem.project(x_raw);
    sol.coeffs = coeffs_from_beta(prog, beta);
    sol.beta = prog.factor.L.transpose() * sol.coeffs;
    const Eigen::VectorXd g = prog.gram * sol.coeffs;

    // Smallest g0 that is feasible at every constraint point.
    double g0 = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < prog.num_points(); ++j)
        g0 = std::max(g0, prog.problem.cost_from_pieces(sol.x, prog.all_points.row(j).transpose()) - g(j));
    sol.g0 = g0;
    sol.feasibility_residual = 0.0;
    for (Eigen::Index j = 0; j < prog.num_points(); ++j)
        sol.feasibility_residual =
            std::max(sol.feasibility_residual,
                     prog.problem.cost_from_pieces(sol.x, prog.all_points.row(j).transpose()) - g0 - g(j));
    sol.rkhs_norm = sol.beta.norm();
    sol.objective = g0 + g.head(prog.n_nominal).mean() + prog.epsilon * sol.rkhs_norm;
    return sol;
}

double evaluate_g(const DualSolution& sol, const DualProgram& prog, const Eigen::Ref<const Eigen::RowVectorXd>& xi) {
    if (xi.size() != prog.all_points.cols()) throw InvalidArgument("dimension mismatch");
    double total = 0.0;
    for (Eigen::Index p = 0; p < sol.coeffs.size(); ++p)
        if (sol.coeffs(p) != 0.0) total += sol.coeffs(p) * kernel_eval(prog.all_points.row(p), xi, prog.bandwidth);
    return total;
}

CertificateReport worst_case_certificate(const DualSolution& sol, const DualProgram& prog,
                                         const WeightedMeasure& probe) {
    if (probe.dim() != prog.all_points.cols()) throw InvalidArgument("dimension mismatch");
    std::set<std::vector<double>> support;
    for (Eigen::Index j = 0; j < prog.num_points(); ++j) support.insert(key_of(prog.all_points.row(j)));
    for (Eigen::Index a = 0; a < probe.size(); ++a)
        if (probe.weights()(a) > 0.0 && !support.count(key_of(probe.atoms().row(a))))
            throw InvalidArgument("probe has mass outside the constraint points");

    const WeightedMeasure nominal = WeightedMeasure::uniform(prog.all_points.topRows(prog.n_nominal));
    const double dist = mmd(probe, nominal, prog.bandwidth);
    if (dist > prog.epsilon + 1e-12) throw InvalidArgument("probe lies outside the ambiguity ball");

    double expected = 0.0;
    for (Eigen::Index a = 0; a < probe.size(); ++a)
        expected += probe.weights()(a) * prog.problem.cost_from_pieces(sol.x, probe.atoms().row(a).transpose());
    const CertificateReport report{expected, sol.objective, sol.objective - expected, dist};
    if (report.margin < -1e-6)
        throw InternalConsistency("weak duality violated: margin " + std::to_string(report.margin));
    return report;
}

} // namespace robas
