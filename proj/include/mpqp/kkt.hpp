#pragma once

#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"

namespace mpqp {

/// Squared KKT violations of one candidate solution. Each field is the mean
/// over its rows of the squared per-row expression:
///   kkt1_x / kkt1_delta  stationarity 2Qx + C + θ_c - Aeᵀλ + Acᵀμ, split at
///                        QpProblem::primary_block (kkt1_delta = 0 without one)
///   kkt2_eq              be + θ_e - Ae x
///   kkt2_ineq            max(0, Ac x - bc - θ_C)
///   kkt3                 max(0, -μ)
///   kkt4                 μ ⊙ (Ac x - bc - θ_C)
struct KktReport {
    double kkt1_x = 0.0;
    double kkt1_delta = 0.0;
    double kkt2_eq = 0.0;
    double kkt2_ineq = 0.0;
    double kkt3 = 0.0;
    double kkt4 = 0.0;

    double max() const;
    KktReport& operator+=(const KktReport& o);
    KktReport scaled(double s) const;
};

enum class RowAggregation { Mean, Sum };

KktReport kkt_report(const QpProblem& problem, const ParamPoint& p, const FullSolution& s,
                     RowAggregation agg = RowAggregation::Mean);

/// True iff every field is strictly below tol.
bool is_optimal(const KktReport& r, double tol);

/// Mean of reports field by field (zero report for an empty input).
KktReport mean_report(const std::vector<KktReport>& reports);

json report_to_json(const KktReport& r);
KktReport report_from_json(const json& j);

/// Max-abs residual test used by the oracle: stationarity, equality and
/// inequality feasibility, and dual sign all within `tol` unsquared.
bool satisfies_kkt_strict(const QpProblem& problem, const ParamPoint& p, const FullSolution& s, double tol);

}  // namespace mpqp
