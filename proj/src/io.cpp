#include "robas/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "robas/error.hpp"

namespace robas {

namespace {

double parse_real(std::string_view field, std::size_t line) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
        field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw ParseError("line " + std::to_string(line) + ": '" + std::string(field) + "' is not a number");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& text, std::size_t line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(line) + ": unterminated quote");
    out.push_back(std::move(cur));
    return out;
}

std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    return out + "\"";
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
}

} // namespace

Points parse_points_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (blank(text)) continue;
        std::vector<double> row;
        std::string_view rest(text);
        while (true) {
            const auto comma = rest.find(',');
            row.push_back(parse_real(rest.substr(0, comma), line));
            if (!std::isfinite(row.back())) throw ParseError("line " + std::to_string(line) + ": non-finite value");
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("line " + std::to_string(line) + ": expected " + std::to_string(rows.front().size()) +
                             " columns, found " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no observations in data file");
    Points out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t d = 0; d < rows[i].size(); ++d)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
    return out;
}

Points read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse_points_csv(in);
}

std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_results_csv(std::ostream& out, const ExperimentResult& result) {
    out << results_header << '\n';
    auto emit = [&](std::string_view method, double eps, const std::string& seed, double m, double v, double ts,
                    double tp, const std::string& status) {
        out << method << ',' << format_real(eps) << ',' << seed << ',' << format_real(m) << ',' << format_real(v)
            << ',' << format_real(ts) << ',' << format_real(tp) << ',' << quote_field(status) << '\n';
    };
    for (const SummaryRow& s : result.summary) {
        for (const ResultRow& r : result.rows)
            if (r.method == s.method && r.epsilon == s.epsilon)
                emit(to_string(r.method), r.epsilon, std::to_string(r.seed), r.oos_mean, r.oos_var, r.solve_time_s,
                     r.sample_time_s, r.status);
        emit(to_string(s.method), s.epsilon, "all", s.m, s.v, s.solve_time_s, s.sample_time_s, "summary");
    }
}

std::vector<ResultRecord> parse_results_csv(std::istream& in) {
    std::string text;
    if (!std::getline(in, text)) throw ParseError("empty results file");
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text != results_header) throw ParseError("unexpected results header");
    std::vector<ResultRecord> out;
    std::size_t line = 1;
    while (std::getline(in, text)) {
        ++line;
        if (blank(text)) continue;
        const auto f = split_csv_line(text, line);
        if (f.size() != 8) throw ParseError("line " + std::to_string(line) + ": expected 8 fields");
        ResultRecord r;
        r.method = f[0];
        r.epsilon = parse_real(f[1], line);
        if (f[2] != "all") {
            int seed = 0;
            const auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), seed);
            if (ec != std::errc() || ptr != f[2].data() + f[2].size())
                throw ParseError("line " + std::to_string(line) + ": bad seed '" + f[2] + "'");
            r.seed = seed;
        }
        r.oos_mean = parse_real(f[3], line);
        r.oos_var = parse_real(f[4], line);
        r.solve_time_s = parse_real(f[5], line);
        r.sample_time_s = parse_real(f[6], line);
        r.status = f[7];
        out.push_back(std::move(r));
    }
    return out;
}

Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_json(ss.str());
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
    const char* v = std::getenv("ROBAS_SEED");
    if (!v || !*v) return fallback;
    std::uint64_t seed = 0;
    const std::string_view s(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw InvalidArgument("ROBAS_SEED must be an unsigned integer");
    return seed;
}

// ---- config (de)serialization ----

namespace {

// Reads an object while tracking which keys were consumed, so that typos in a
// config surface as errors instead of silently falling back to defaults.
class Fields {
public:
    Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j.is_object()) throw InvalidArgument(where_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw InvalidArgument(where_ + "." + key + " has the wrong type");
        }
    }

    void get_vector(const char* key, Eigen::VectorXd& out) {
        std::vector<double> v(out.data(), out.data() + out.size());
        get(key, v);
        out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    const Json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!seen_.count(k)) throw InvalidArgument("unknown key '" + k + "' in " + where_);
    }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

// Integral JSON values arrive as numbers; reject fractional or negative ones.
template <class I>
I checked_count(double v, const char* what) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1e15) throw InvalidArgument(std::string(what) + " must be a nonnegative integer");
    return static_cast<I>(v);
}

DGPSpec dgp_from_json(const Json& j) {
    Fields f(j, "dgp");
    std::string kind = "contaminated-gaussian";
    f.get("kind", kind);
    DGPSpec d;
    d.kind = parse_dgp_kind(kind);
    if (d.kind == DgpKind::PortfolioGaussian) d = DGPSpec::portfolio(0.0);
    f.get_vector("center", d.center);
    f.get_vector("other", d.other);
    f.get("sigma", d.sigma);
    f.get("eta", d.eta);
    f.get("rate", d.rate);
    f.get("outlier_mean", d.outlier_mean);
    f.get("outlier_sd", d.outlier_sd);
    f.finish();
    d.validate();
    return d;
}

Problem problem_from_json(const Json& j, Eigen::Index default_dim) {
    Fields f(j, "problem");
    std::string kind = "newsvendor";
    double dim = double(default_dim), b = 8.0, h = 3.0;
    f.get("kind", kind);
    f.get("dim", dim);
    f.get("b", b);
    f.get("h", h);
    f.finish();
    const auto D = checked_count<Eigen::Index>(dim, "problem.dim");
    return parse_problem_kind(kind) == ProblemKind::Newsvendor ? Problem::newsvendor(D, b, h) : Problem::portfolio(D);
}

Model model_from_json(const Json& j, Eigen::Index default_dim) {
    Fields f(j, "model");
    std::string kind = "gaussian-location";
    double dim = double(default_dim), sigma = 1.0;
    f.get("kind", kind);
    f.get("dim", dim);
    f.get("sigma", sigma);
    f.finish();
    const auto D = checked_count<Eigen::Index>(dim, "model.dim");
    switch (parse_model_kind(kind)) {
    case ModelKind::GaussianLocation: return Model::gaussian_location(D, sigma);
    case ModelKind::GaussianMeanCov: return Model::gaussian_mean_cov(D);
    case ModelKind::ExponentialRate: return Model::exponential_rate(D);
    }
    throw InvalidArgument("unknown model");
}

NplConfig npl_from_json(const Json& j) {
    Fields f(j, "npl");
    NplConfig c;
    double B = c.B, S = double(c.S), tau = double(c.dp.tau), steps = c.adam.steps, batch = double(c.adam.model_batch);
    f.get("B", B);
    f.get("S", S);
    f.get("alpha", c.dp.alpha);
    f.get("tau", tau);
    f.get("lr", c.adam.learning_rate);
    f.get("steps", steps);
    f.get("batch", batch);
    f.finish();
    c.B = checked_count<int>(B, "npl.B");
    c.S = checked_count<Eigen::Index>(S, "npl.S");
    c.dp.tau = checked_count<Eigen::Index>(tau, "npl.tau");
    c.adam.steps = checked_count<int>(steps, "npl.steps");
    c.adam.model_batch = checked_count<Eigen::Index>(batch, "npl.batch");
    if (!(c.dp.alpha >= 0.0)) throw InvalidArgument("npl.alpha must be >= 0");
    c.adam.validate();
    return c;
}

} // namespace

ExperimentConfig experiment_config_from_json(const Json& j) {
    Fields f(j, "config");
    ExperimentConfig c;
    if (const Json* d = f.child("dgp")) c.dgp = dgp_from_json(*d);
    else throw InvalidArgument("config needs a 'dgp' section");
    const Eigen::Index D = c.dgp.dim();
    c.problem = Problem::newsvendor(D);
    c.model = Model::gaussian_location(D, c.dgp.sigma);
    if (const Json* p = f.child("problem")) c.problem = problem_from_json(*p, D);
    if (const Json* m = f.child("model")) c.model = model_from_json(*m, D);
    if (const Json* n = f.child("npl")) c.npl = npl_from_json(*n);

    std::vector<std::string> methods;
    f.get("methods", methods);
    if (!methods.empty()) {
        c.methods.clear();
        for (const auto& m : methods) c.methods.push_back(parse_nominal_kind(m));
    }
    f.get("epsilons", c.epsilon_grid);
    double n_train = double(c.n_train), T = double(c.T_test), J = c.J_reps, m = double(c.discretization_points);
    double seed = double(c.seed), threads = c.threads;
    std::string strategy(to_string(c.strategy));
    f.get("n_train", n_train);
    f.get("T_test", T);
    f.get("J", J);
    f.get("m", m);
    f.get("strategy", strategy);
    f.get("seed", seed);
    f.get("threads", threads);
    f.get("record_timings", c.record_timings);
    if (const Json* s = f.child("solver")) {
        Fields sf(*s, "solver");
        double max_iter = c.solver.ipm.max_iter, sub_iter = c.solver.subgradient_iterations;
        sf.get("accept_tol", c.solver.ipm.accept_tol);
        sf.get("max_iter", max_iter);
        sf.get("subgradient_fallback", c.solver.subgradient_fallback);
        sf.get("subgradient_iterations", sub_iter);
        sf.finish();
        c.solver.ipm.max_iter = checked_count<int>(max_iter, "solver.max_iter");
        c.solver.subgradient_iterations = checked_count<int>(sub_iter, "solver.subgradient_iterations");
    }
    f.finish();
    c.n_train = checked_count<Eigen::Index>(n_train, "n_train");
    c.T_test = checked_count<Eigen::Index>(T, "T_test");
    c.J_reps = checked_count<int>(J, "J");
    c.discretization_points = checked_count<Eigen::Index>(m, "m");
    c.strategy = parse_strategy(strategy);
    c.seed = checked_count<std::uint64_t>(seed, "seed");
    c.threads = checked_count<unsigned>(threads, "threads");
    c.validate();
    return c;
}

Json to_json(const DGPSpec& d) {
    Json j;
    j["kind"] = to_string(d.kind);
    j["center"] = std::vector<double>(d.center.data(), d.center.data() + d.center.size());
    j["other"] = std::vector<double>(d.other.data(), d.other.data() + d.other.size());
    j["sigma"] = d.sigma;
    j["eta"] = d.eta;
    j["rate"] = d.rate;
    j["outlier_mean"] = d.outlier_mean;
    j["outlier_sd"] = d.outlier_sd;
    return j;
}

Json to_json(const Problem& p) {
    Json j;
    j["kind"] = to_string(p.kind());
    j["dim"] = p.dim();
    if (p.kind() == ProblemKind::Newsvendor) {
        j["b"] = p.backorder();
        j["h"] = p.holding();
    }
    return j;
}

Json to_json(const Model& m) {
    Json j;
    j["kind"] = to_string(m.kind());
    j["dim"] = m.dim();
    if (m.kind() == ModelKind::GaussianLocation) j["sigma"] = m.sigma();
    return j;
}

Json to_json(const NplConfig& c) {
    Json j;
    j["B"] = c.B;
    j["S"] = c.S;
    j["alpha"] = c.dp.alpha;
    j["tau"] = c.dp.tau;
    j["lr"] = c.adam.learning_rate;
    j["steps"] = c.adam.steps;
    j["batch"] = c.adam.model_batch;
    return j;
}

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["dgp"] = to_json(c.dgp);
    j["problem"] = to_json(c.problem);
    j["model"] = to_json(c.model);
    j["npl"] = to_json(c.npl);
    std::vector<std::string> methods;
    for (auto m : c.methods) methods.emplace_back(to_string(m));
    j["methods"] = methods;
    j["epsilons"] = c.epsilon_grid;
    j["n_train"] = c.n_train;
    j["T_test"] = c.T_test;
    j["J"] = c.J_reps;
    j["m"] = c.discretization_points;
    j["strategy"] = to_string(c.strategy);
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["record_timings"] = c.record_timings;
    j["solver"] = to_json(c.solver);
    return j;
}

Json to_json(const DroSolverConfig& c) {
    return {{"accept_tol", c.ipm.accept_tol},
            {"max_iter", c.ipm.max_iter},
            {"subgradient_fallback", c.subgradient_fallback},
            {"subgradient_iterations", c.subgradient_iterations}};
}

} // namespace robas
