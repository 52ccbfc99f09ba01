#pragma once

#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"

#include <string>

namespace mpqp {

enum class OracleMethod { Enumeration, ActiveSet };

std::string to_string(OracleMethod m);

struct OracleResult {
    FullSolution solution;
    ActiveSet active_set;
    Index iterations = 0;
    OracleMethod method = OracleMethod::ActiveSet;
};

struct OracleOptions {
    /// Max-abs KKT residual a candidate must meet to be accepted.
    double kkt_tol = 1e-9;
    /// μ_j above this marks constraint j binding.
    double dual_threshold = 1e-9;
    /// Largest m2 accepted by the enumeration solver.
    Index max_enumeration_m2 = 20;
    Index max_iterations = 10000;
};

/// Tries every inequality subset in increasing cardinality (lexicographic
/// within a cardinality) and returns the first KKT point. Throws Infeasible
/// or OracleLimit.
OracleResult solve_enumerate(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts = {});

/// Dual active-set iteration (Goldfarb-Idnani) from the equality-constrained
/// optimum: add the most violated constraint, drop constraints whose dual
/// would turn negative. Throws Infeasible or CycleDetected.
OracleResult solve_active_set(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts = {});

/// Active-set solve, falling back to enumeration on numerical trouble when
/// m2 is small enough.
OracleResult solve_auto(const QpProblem& problem, const ParamPoint& p, const OracleOptions& opts = {});

json oracle_result_to_json(const OracleResult& r, const QpProblem& problem, const ParamPoint& p);

}  // namespace mpqp
