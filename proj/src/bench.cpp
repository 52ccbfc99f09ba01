#include "mpqp/bench.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/qp_core.hpp"
#include "mpqp/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mpqp {

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median_seconds(const std::function<void()>& fn, int runs) {
    if (runs <= 0) throw ValidationError("timing needs at least one run");
    std::vector<double> t;
    for (int i = 0; i < runs; ++i) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return quantile(t, 0.5);
}

const MethodMetrics& BenchReport::find(const std::string& method, const std::string& dataset) const {
    for (const auto& r : rows)
        if (r.method == method && r.dataset == dataset) return r;
    throw ValidationError("no benchmark row for " + method + " on " + dataset);
}

namespace {

MethodMetrics evaluate(const std::string& method, const std::string& dataset, const QpProblem& problem,
                       const std::vector<ParamPoint>& points, const BatchSolution& sol, const VectorXd& oracle_obj,
                       double kkt_tol) {
    MethodMetrics m;
    m.method = method;
    m.dataset = dataset;
    m.rows = static_cast<Index>(points.size());
    std::vector<KktReport> reports;
    std::vector<double> gaps, abs_gaps;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const FullSolution s = sol.row(static_cast<Index>(i));
        reports.push_back(kkt_report(problem, points[i], s));
        if (is_optimal(reports.back(), kkt_tol)) ++m.kkt_pass;
        const double g = oracle_obj[static_cast<Index>(i)] - objective(problem, s.x, points[i].theta_c);
        gaps.push_back(g);
        abs_gaps.push_back(std::abs(g));
    }
    m.kkt = mean_report(reports);
    const double levels[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
    for (int k = 0; k < 5; ++k) m.gap[static_cast<std::size_t>(k)] = quantile(gaps, levels[k]);
    m.abs_gap_median = quantile(abs_gaps, 0.5);
    return m;
}

}  // namespace

BenchReport benchmark(const QpProblem& problem, const std::string& case_name, const PsnnModel& psnn,
                      const DnnModel* dnn, const std::map<std::string, MatrixXd>& datasets, const BenchOptions& opts) {
    psnn.check(problem);
    BenchReport report;
    report.case_name = case_name;
    report.fingerprint = fingerprint(problem);
    if (dnn && dnn->fingerprint != report.fingerprint)
        throw FingerprintMismatch("baseline was trained for problem " + dnn->fingerprint + ", got " + report.fingerprint);

    for (const auto& [name, all] : datasets) {
        // oracle pass, which also decides which rows are feasible
        std::vector<ParamPoint> points;
        std::vector<FullSolution> oracle;
        Index infeasible = 0;
        for (Index i = 0; i < all.rows(); ++i) {
            const ParamPoint p = ParamPoint::from_varying(problem, VectorXd(all.row(i).transpose()));
            try {
                oracle.push_back(solve_auto(problem, p).solution);
                points.push_back(p);
            } catch (const Infeasible&) {
                ++infeasible;
            }
        }
        report.infeasible[name] = infeasible;
        const Index n = static_cast<Index>(points.size());
        if (n == 0) continue;

        MatrixXd thetas(n, all.cols());
        BatchSolution osol{MatrixXd(n, problem.n()), MatrixXd(n, problem.m1()), MatrixXd(n, problem.m2())};
        VectorXd obj(n);
        for (Index i = 0; i < n; ++i) {
            const auto& p = points[static_cast<std::size_t>(i)];
            const auto& s = oracle[static_cast<std::size_t>(i)];
            thetas.row(i) = p.varying(problem).transpose();
            osol.x.row(i) = s.x.transpose();
            osol.lambda.row(i) = s.lambda.transpose();
            osol.mu.row(i) = s.mu.transpose();
            obj[i] = objective(problem, s.x, p.theta_c);
        }

        MethodMetrics om = evaluate("oracle", name, problem, points, osol, obj, opts.kkt_tol);
        if (opts.time_oracle)
            om.seconds = median_seconds(
                [&] {
                    for (const auto& p : points) solve_auto(problem, p);
                },
                opts.timing_runs);
        report.rows.push_back(om);

        const BatchSolution ps = psnn.predict_batch(problem, thetas);
        MethodMetrics pm = evaluate("psnn", name, problem, points, ps, obj, opts.kkt_tol);
        pm.seconds = median_seconds([&] { psnn.predict_batch(problem, thetas); }, opts.timing_runs);
        report.rows.push_back(pm);

        if (dnn) {
            const BatchSolution ds = dnn_predict_batch(*dnn, problem, thetas);
            MethodMetrics dm = evaluate("dnn", name, problem, points, ds, obj, opts.kkt_tol);
            dm.seconds = median_seconds([&] { dnn_predict_batch(*dnn, problem, thetas); }, opts.timing_runs);
            report.rows.push_back(dm);
        }
    }
    return report;
}

json bench_to_json(const BenchReport& r) {
    json rows = json::array();
    for (const auto& m : r.rows)
        rows.push_back({{"method", m.method},
                        {"dataset", m.dataset},
                        {"rows", m.rows},
                        {"kkt_pass", m.kkt_pass},
                        {"kkt", report_to_json(m.kkt)},
                        {"gap_quantiles", m.gap},
                        {"abs_gap_median", m.abs_gap_median},
                        {"seconds", m.seconds}});
    return {{"schema_version", kSchemaVersion},
            {"kind", "mpqp.bench"},
            {"case", r.case_name},
            {"fingerprint", r.fingerprint},
            {"infeasible_rows", r.infeasible},
            {"rows", rows}};
}

std::string bench_to_table(const BenchReport& r) {
    std::ostringstream os;
    os << "case " << r.case_name << "\n";
    os << std::left << std::setw(8) << "method" << std::setw(11) << "dataset" << std::right << std::setw(6) << "rows"
       << std::setw(11) << "kkt1_x" << std::setw(11) << "kkt1_d" << std::setw(11) << "kkt2_eq" << std::setw(11)
       << "kkt2_ineq" << std::setw(11) << "kkt3" << std::setw(11) << "kkt4" << std::setw(11) << "|gap| med"
       << std::setw(11) << "seconds" << "\n";
    os << std::scientific << std::setprecision(2);
    for (const auto& m : r.rows) {
        os << std::left << std::setw(8) << m.method << std::setw(11) << m.dataset << std::right << std::setw(6) << m.rows
           << std::setw(11) << m.kkt.kkt1_x << std::setw(11) << m.kkt.kkt1_delta << std::setw(11) << m.kkt.kkt2_eq
           << std::setw(11) << m.kkt.kkt2_ineq << std::setw(11) << m.kkt.kkt3 << std::setw(11) << m.kkt.kkt4
           << std::setw(11) << m.abs_gap_median << std::setw(11) << m.seconds << "\n";
    }
    for (const auto& [name, n] : r.infeasible)
        if (n > 0) os << name << ": " << n << " infeasible rows excluded\n";
    return os.str();
}

std::string bench_to_csv(const BenchReport& r) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "method,dataset,rows,kkt_pass,kkt1_x,kkt1_delta,kkt2_eq,kkt2_ineq,kkt3,kkt4,gap_min,gap_q25,gap_median,gap_q75,"
          "gap_max,abs_gap_median,seconds\n";
    for (const auto& m : r.rows) {
        os << m.method << ',' << m.dataset << ',' << m.rows << ',' << m.kkt_pass << ',' << m.kkt.kkt1_x << ','
           << m.kkt.kkt1_delta << ',' << m.kkt.kkt2_eq << ',' << m.kkt.kkt2_ineq << ',' << m.kkt.kkt3 << ','
           << m.kkt.kkt4;
        for (double g : m.gap) os << ',' << g;
        os << ',' << m.abs_gap_median << ',' << m.seconds << '\n';
    }
    return os.str();
}

std::vector<double> read_scalers(const std::string& text) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            if (line.find_first_of("abcdefghijklmnopqrstuvwxyz") != std::string::npos) continue;
        }
        const auto comma = line.find(',');
        try {
            std::size_t used = 0;
            const std::string field = comma == std::string::npos ? line : line.substr(comma + 1);
            const double v = std::stod(field, &used);
            if (!(v >= 0.0) || !std::isfinite(v)) throw ParseError("scaler must be finite and nonnegative");
            out.push_back(v);
        } catch (const std::logic_error&) {
            throw ParseError("scaler file line " + std::to_string(lineno) + ": cannot read a number from '" + line + "'");
        } catch (const ParseError& e) {
            throw ParseError("scaler file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (out.empty()) throw ParseError("scaler file has no values");
    return out;
}

std::vector<double> default_scalers() {
    const auto path = data_dir() / "profiles" / "hourly_scalers.csv";
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return read_scalers(ss.str());
}

Index SimResult::failures() const {
    return static_cast<Index>(std::count(kkt_pass.begin(), kkt_pass.end(), false));
}

SimResult simulate_uncertainty(const PsnnModel& model, const GridCase& grid, const SimConfig& cfg) {
    const QpProblem problem = build_qp(grid);
    model.check(problem);
    if (cfg.samples_per_hour <= 0) throw ValidationError("samples per hour must be positive");
    if (cfg.scalers.empty()) throw ValidationError("simulation needs at least one hourly scaler");
    if (!(cfg.rate > 0.0) || !(cfg.cap >= 0.0)) throw ValidationError("renewable rate must be positive, cap nonnegative");

    const auto loads = grid.load_buses();
    const VectorXd base = grid.base_load();
    SimResult r;
    r.renewable_buses = cfg.renewable_buses;
    if (r.renewable_buses.empty()) {
        Index best = 0;
        base.maxCoeff(&best);
        r.renewable_buses.push_back(grid.buses[static_cast<std::size_t>(loads[static_cast<std::size_t>(best)])].id);
    }
    std::vector<Index> slot;  // renewable k -> position among load buses
    for (int id : r.renewable_buses) {
        const Index bi = grid.bus_index(id);
        const auto it = std::find(loads.begin(), loads.end(), bi);
        if (it == loads.end()) throw ValidationError("renewable bus " + std::to_string(id) + " is not a load bus");
        slot.push_back(static_cast<Index>(it - loads.begin()));
    }

    const double rate = cfg.mean_reading ? 1.0 / cfg.rate : cfg.rate;
    const Index hours = static_cast<Index>(cfg.scalers.size()), S = cfg.samples_per_hour;
    const Index nr = static_cast<Index>(slot.size());
    r.thetas.resize(hours * S, base.size());
    r.renewables.resize(hours * S, nr);
    const Rng root(cfg.seed);
    for (Index h = 0; h < hours; ++h) {
        Rng rng = root.split(static_cast<std::uint64_t>(h));
        for (Index s = 0; s < S; ++s) {
            const Index row = h * S + s;
            r.hour.push_back(h);
            r.thetas.row(row) = cfg.scalers[static_cast<std::size_t>(h)] * base.transpose();
            for (Index k = 0; k < nr; ++k) {
                const double draw = std::min(rng.exponential(rate), cfg.cap);
                r.renewables(row, k) = draw;
                r.thetas(row, slot[static_cast<std::size_t>(k)]) -= draw;
            }
        }
    }

    const auto start = std::chrono::steady_clock::now();
    r.solution = model.predict_batch(problem, r.thetas);
    r.predict_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    r.kkt_pass.resize(static_cast<std::size_t>(r.rows()));
    for (Index i = 0; i < r.rows(); ++i) {
        const ParamPoint p = ParamPoint::from_varying(problem, VectorXd(r.thetas.row(i).transpose()));
        r.kkt_pass[static_cast<std::size_t>(i)] = is_optimal(kkt_report(problem, p, r.solution.row(i)), cfg.kkt_tol);
    }
    r.meta = {{"hours", hours},
              {"samples_per_hour", S},
              {"rate", cfg.rate},
              {"parameter_reading", cfg.mean_reading ? "mean" : "rate"},
              {"cap", cfg.cap},
              {"renewable_buses", r.renewable_buses},
              {"seed", cfg.seed},
              {"scaler_source", cfg.scaler_source},
              {"kkt_tol", cfg.kkt_tol},
              {"kkt_failures", r.failures()},
              {"predict_seconds", r.predict_seconds}};
    return r;
}

std::string dispatch_quantiles_csv(const SimResult& r, const GridCase& grid) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "hour,generator,bus,passing_rows,min,q25,median,q75,max\n";
    const Index hours = r.hour.empty() ? 0 : r.hour.back() + 1;
    for (Index h = 0; h < hours; ++h)
        for (Index g = 0; g < grid.num_generators(); ++g) {
            std::vector<double> v;
            for (Index i = 0; i < r.rows(); ++i)
                if (r.hour[static_cast<std::size_t>(i)] == h && r.kkt_pass[static_cast<std::size_t>(i)])
                    v.push_back(r.solution.x(i, g));
            os << h << ',' << g << ',' << grid.generators[static_cast<std::size_t>(g)].bus << ',' << v.size();
            for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) os << ',' << quantile(v, q);
            os << '\n';
        }
    return os.str();
}

std::string dual_summary_csv(const SimResult& r, const GridCase& grid) {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "hour,constraint,generator,side,binding_fraction,mean_mu,max_mu\n";
    const Index ng = grid.num_generators();
    const Index hours = r.hour.empty() ? 0 : r.hour.back() + 1;
    for (Index h = 0; h < hours; ++h)
        for (Index j = 0; j < r.solution.mu.cols(); ++j) {
            Index n = 0, binding = 0;
            double sum = 0.0, mx = 0.0;
            for (Index i = 0; i < r.rows(); ++i) {
                if (r.hour[static_cast<std::size_t>(i)] != h || !r.kkt_pass[static_cast<std::size_t>(i)]) continue;
                const double mu = r.solution.mu(i, j);
                ++n;
                sum += mu;
                mx = std::max(mx, mu);
                if (mu > 1e-9) ++binding;
            }
            os << h << ',' << j << ',' << j % ng << ',' << (j < ng ? "upper" : "lower") << ','
               << (n ? static_cast<double>(binding) / static_cast<double>(n) : 0.0) << ','
               << (n ? sum / static_cast<double>(n) : 0.0) << ',' << mx << '\n';
        }
    return os.str();
}

std::string sweep_report(const QpProblem& problem, const VectorXd& theta0, Index axis, double lo, double hi,
                         double step) {
    const Index nv = problem.num_varying();
    if (theta0.size() != nv) throw ValidationError("theta0 must have one entry per varying parameter");
    if (axis < 0 || axis >= nv) throw ValidationError("sweep axis out of range");
    if (!(step > 0.0)) throw ValidationError("sweep step must be positive");
    std::ostringstream os;
    os << std::setprecision(17);
    os << "theta,status";
    for (Index j = 0; j < problem.m2(); ++j) os << ",mu_" << j;
    os << '\n';
    if (hi < lo) return os.str();
    const auto count = static_cast<Index>(std::floor((hi - lo) / step + 1e-9));
    for (Index i = 0; i <= count; ++i) {
        VectorXd v = theta0;
        v[axis] = lo + static_cast<double>(i) * step;
        os << v[axis];
        try {
            const OracleResult res = solve_auto(problem, ParamPoint::from_varying(problem, v));
            os << ",optimal";
            for (Index j = 0; j < problem.m2(); ++j) os << ',' << res.solution.mu[j];
        } catch (const Infeasible&) {
            os << ",infeasible";
            for (Index j = 0; j < problem.m2(); ++j) os << ',';
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace mpqp
