#include "mpqp/oracle.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/qp_core.hpp"

#include <limits>
#include <set>

namespace mpqp {

std::string to_string(OracleMethod m) { return m == OracleMethod::Enumeration ? "enumeration" : "active_set"; }

namespace {

// Zero out duals at or below the binding threshold so that the reported
// active set and the μ support coincide exactly.
OracleResult finalize(FullSolution s, Index iterations, OracleMethod method, double threshold) {
    for (Index j = 0; j < s.mu.size(); ++j) {
        if (s.mu[j] <= threshold) s.mu[j] = 0.0;
    }
    ActiveSet active = active_set_from_mu(s.mu, threshold);
    return {std::move(s), std::move(active), iterations, method};
}

// Advances `idx` to the next k-combination of {0..m-1} in lexicographic order.
bool next_combination(std::vector<Index>& idx, Index m) {
    const Index k = static_cast<Index>(idx.size());
    for (Index i = k - 1; i >= 0; --i) {
        if (idx[static_cast<std::size_t>(i)] < m - k + i) {
            ++idx[static_cast<std::size_t>(i)];
            for (Index t = i + 1; t < k; ++t)
                idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

OracleResult solve_enumerate(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts) {
    p.check(problem);
    const Index m2 = problem.m2();
    if (m2 > opts.max_enumeration_m2)
        throw OracleLimit("enumeration oracle limited to m2 <= " + std::to_string(opts.max_enumeration_m2) +
                          " (got " + std::to_string(m2) + ")");

    // LICQ caps the number of rows that can bind together with Ae.
    const Index max_card = std::min(m2, problem.n() - problem.m1());
    Index tried = 0;
    for (Index card = 0; card <= max_card; ++card) {
        std::vector<Index> idx(static_cast<std::size_t>(card));
        for (Index i = 0; i < card; ++i) idx[static_cast<std::size_t>(i)] = i;
        do {
            ++tried;
            try {
                const FullSolution s = RegionFactor(problem, ActiveSet(idx)).solve(p);
                if (satisfies_kkt_strict(problem, p, s, opts.kkt_tol))
                    return finalize(s, tried, OracleMethod::Enumeration, opts.dual_threshold);
            } catch (const DegenerateActiveSet&) {
            } catch (const SingularKkt&) {
            }
        } while (next_combination(idx, m2));
    }
    throw Infeasible("no active set satisfies the KKT conditions (" + std::to_string(tried) + " subsets tried)");
}

OracleResult solve_active_set(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts) {
    p.check(problem);
    const Index n = problem.n(), m1 = problem.m1(), m2 = problem.m2();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    constexpr double kViolationTol = 1e-11;

    const EqualitySolution start = solve_equality(problem, p);
    VectorXd x = start.x;
    VectorXd lambda = start.lambda;
    VectorXd mu = VectorXd::Zero(m2);
    std::vector<Index> active;  // kept sorted
    std::set<std::vector<Index>> visited;
    Index iterations = 0;

    auto slack = [&](Index j) { return problem.Ac.row(j).dot(x) - problem.bc[j] - p.theta_C[j]; };

    for (;;) {
        // Most violated constraint; strict comparison keeps the lowest index on ties.
        Index enter = -1;
        double worst = kViolationTol;
        for (Index j = 0; j < m2; ++j) {
            if (std::binary_search(active.begin(), active.end(), j)) continue;
            const double s = slack(j);
            if (s > worst) {
                worst = s;
                enter = j;
            }
        }
        if (enter < 0) break;
        if (!visited.insert(active).second)
            throw CycleDetected("active set " + ActiveSet(active).key() + " revisited");

        const VectorXd a_p = problem.Ac.row(enter).transpose();
        for (;;) {
            if (++iterations > opts.max_iterations) throw CycleDetected("active-set iteration limit reached");

            const Index na = static_cast<Index>(active.size());
            MatrixXd K = MatrixXd::Zero(n + m1 + na, n + m1 + na);
            K.topLeftCorner(n + m1, n + m1) = assemble_kkt(problem);
            for (Index t = 0; t < na; ++t) {
                const auto row = problem.Ac.row(active[static_cast<std::size_t>(t)]);
                K.block(0, n + m1 + t, n, 1) = row.transpose();
                K.block(n + m1 + t, 0, 1, n) = row;
            }
            VectorXd rhs = VectorXd::Zero(n + m1 + na);
            rhs.head(n) = -a_p;
            const VectorXd d = DenseLu(K, "active-set step").solve(rhs);
            const VectorXd dx = d.head(n);
            const VectorXd dlambda = d.segment(n, m1);
            const VectorXd dmu = d.tail(na);

            // a_pᵀdx = -dxᵀ(2Q)dx <= 0; zero means a_p lies in the span of the active rows.
            const double ap_dx = a_p.dot(dx);
            const double full = (-ap_dx > 1e-12 * a_p.squaredNorm()) ? slack(enter) / -ap_dx : kInf;

            double partial = kInf;
            Index leave = -1;
            for (Index t = 0; t < na; ++t) {
                if (dmu[t] < -1e-14) {
                    const Index j = active[static_cast<std::size_t>(t)];
                    const double step = -mu[j] / dmu[t];
                    if (step < partial) {
                        partial = step;
                        leave = t;
                    }
                }
            }

            if (full == kInf && partial == kInf)
                throw Infeasible("constraint " + std::to_string(enter) + " cannot be satisfied");

            const double step = std::min(full, partial);
            x += step * dx;
            lambda += step * dlambda;
            for (Index t = 0; t < na; ++t) mu[active[static_cast<std::size_t>(t)]] += step * dmu[t];
            mu[enter] += step;

            if (full <= partial) {
                active.insert(std::upper_bound(active.begin(), active.end(), enter), enter);
                break;
            }
            mu[active[static_cast<std::size_t>(leave)]] = 0.0;
            active.erase(active.begin() + leave);
        }
    }

    // Re-solve on the binding set so that complementarity holds exactly.
    const ActiveSet binding = active_set_from_mu(mu, opts.dual_threshold);
    for (const ActiveSet& candidate : {binding, ActiveSet(active)}) {
        try {
            FullSolution s = RegionFactor(problem, candidate, false).solve(p);
            if (satisfies_kkt_strict(problem, p, s, opts.kkt_tol))
                return finalize(std::move(s), iterations, OracleMethod::ActiveSet, opts.dual_threshold);
        } catch (const SingularKkt&) {
        }
    }
    throw SingularKkt("active-set solution failed KKT verification at " + binding.key());
}

OracleResult solve_auto(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts) {
    try {
        return solve_active_set(problem, p, opts);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric || problem.m2() > opts.max_enumeration_m2) throw;
    }
    return solve_enumerate(problem, p, opts);
}

json oracle_result_to_json(const OracleResult& r, const QpProblem& problem, const ParamPoint& p) {
    json j = solution_to_json(r.solution);
    j["schema_version"] = kSchemaVersion;
    j["active_set"] = r.active_set.indices();
    j["iterations"] = r.iterations;
    j["method"] = to_string(r.method);
    j["objective"] = objective(problem, r.solution.x, p.theta_c);
    return j;
}

}  // namespace mpqp
