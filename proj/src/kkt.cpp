#include "mpqp/kkt.hpp"

#include "mpqp/errors.hpp"

#include <algorithm>

namespace mpqp {

double KktReport::max() const { return std::max({kkt1_x, kkt1_delta, kkt2_eq, kkt2_ineq, kkt3, kkt4}); }

KktReport& KktReport::operator+=(const KktReport& o) {
    kkt1_x += o.kkt1_x;
    kkt1_delta += o.kkt1_delta;
    kkt2_eq += o.kkt2_eq;
    kkt2_ineq += o.kkt2_ineq;
    kkt3 += o.kkt3;
    kkt4 += o.kkt4;
    return *this;
}

KktReport KktReport::scaled(double s) const {
    return {kkt1_x * s, kkt1_delta * s, kkt2_eq * s, kkt2_ineq * s, kkt3 * s, kkt4 * s};
}

namespace {

struct Residuals {
    VectorXd stationarity;
    VectorXd equality;
    VectorXd inequality;  // Ac x - bc - θ_C, feasible when <= 0
};

Residuals residuals(const QpProblem& problem, const ParamPoint& p, const FullSolution& s) {
    p.check(problem);
    if (s.x.size() != problem.n() || s.lambda.size() != problem.m1() || s.mu.size() != problem.m2())
        throw ValidationError("kkt_report: solution dimensions do not match the problem");
    Residuals r;
    r.stationarity = 2.0 * problem.Q * s.x + problem.C + p.theta_c - problem.Ae.transpose() * s.lambda +
                     problem.Ac.transpose() * s.mu;
    r.equality = problem.be + p.theta_e - problem.Ae * s.x;
    r.inequality = problem.Ac * s.x - problem.bc - p.theta_C;
    return r;
}

double aggregate(const VectorXd& squared, RowAggregation agg) {
    if (squared.size() == 0) return 0.0;
    return agg == RowAggregation::Mean ? squared.mean() : squared.sum();
}

}  // namespace

KktReport kkt_report(const QpProblem& problem, const ParamPoint& p, const FullSolution& s, RowAggregation agg) {
    const Residuals r = residuals(problem, p, s);
    const Index split = problem.primary_block.value_or(problem.n());

    KktReport out;
    out.kkt1_x = aggregate(r.stationarity.head(split).array().square(), agg);
    out.kkt1_delta = aggregate(r.stationarity.tail(problem.n() - split).array().square(), agg);
    out.kkt2_eq = aggregate(r.equality.array().square(), agg);
    out.kkt2_ineq = aggregate(r.inequality.array().max(0.0).square(), agg);
    out.kkt3 = aggregate((-s.mu.array()).max(0.0).square(), agg);
    out.kkt4 = aggregate((s.mu.array() * r.inequality.array()).square(), agg);
    return out;
}

bool is_optimal(const KktReport& r, double tol) {
    return r.kkt1_x < tol && r.kkt1_delta < tol && r.kkt2_eq < tol && r.kkt2_ineq < tol && r.kkt3 < tol &&
           r.kkt4 < tol;
}

KktReport mean_report(const std::vector<KktReport>& reports) {
    KktReport acc;
    for (const auto& r : reports) acc += r;
    return reports.empty() ? acc : acc.scaled(1.0 / static_cast<double>(reports.size()));
}

json report_to_json(const KktReport& r) {
    return {{"kkt1_x", r.kkt1_x}, {"kkt1_delta", r.kkt1_delta}, {"kkt2_eq", r.kkt2_eq},
            {"kkt2_ineq", r.kkt2_ineq}, {"kkt3", r.kkt3}, {"kkt4", r.kkt4}};
}

KktReport report_from_json(const json& j) {
    try {
        return {j.at("kkt1_x").get<double>(), j.at("kkt1_delta").get<double>(), j.at("kkt2_eq").get<double>(),
                j.at("kkt2_ineq").get<double>(), j.at("kkt3").get<double>(), j.at("kkt4").get<double>()};
    } catch (const json::exception& e) {
        throw ParseError(std::string("kkt report: ") + e.what());
    }
}

bool satisfies_kkt_strict(const QpProblem& problem, const ParamPoint& p, const FullSolution& s, double tol) {
    const Residuals r = residuals(problem, p, s);
    auto max_abs = [](const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
    auto max_pos = [](const VectorXd& v) { return v.size() ? std::max(0.0, v.maxCoeff()) : 0.0; };
    return max_abs(r.stationarity) <= tol && max_abs(r.equality) <= tol && max_pos(r.inequality) <= tol &&
           max_pos(-s.mu) <= tol && max_abs(s.mu.cwiseProduct(r.inequality)) <= tol;
}

}  // namespace mpqp
