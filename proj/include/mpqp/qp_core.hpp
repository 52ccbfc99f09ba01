#pragma once

#include "mpqp/linalg.hpp"
#include "mpqp/problem.hpp"

namespace mpqp {

/// J = [[2Q, -Aeᵀ], [-Ae, 0]].
MatrixXd assemble_kkt(const QpProblem& problem);

/// J with the binding rows of Ac appended:
/// [[2Q, -Aeᵀ, A_Bᵀ], [-Ae, 0, 0], [A_B, 0, 0]].
/// Throws DegenerateActiveSet when [Ae; A_B] loses row rank.
MatrixXd assemble_expanded_kkt(const QpProblem& problem, const ActiveSet& active);

/// Equality-constrained solution function g(0; θ). Throws SingularKkt.
EqualitySolution solve_equality(const QpProblem& problem, const ParamPoint& p);

/// g(μ; θ): the equality solution function with the stationarity
/// right-hand side shifted by -Acᵀμ.
EqualitySolution solution_from_mu(const QpProblem& problem, const VectorXd& mu, const ParamPoint& p);

/// Solve the expanded KKT system of one active set. μ outside the set is
/// exactly zero; no sign or feasibility guarantee beyond that.
FullSolution region_solution(const QpProblem& problem, const ActiveSet& active, const ParamPoint& p);

struct SlopeMatrix {
    MatrixXd slopes;     // |B| x n_varying
    VectorXd intercept;  // |B|
};

/// Affine map θ_varying -> μ_B valid inside the region of `active`.
SlopeMatrix slope_matrix(const QpProblem& problem, const ActiveSet& active);

/// xᵀQx + (C + θ_c)ᵀx + C0
double objective(const QpProblem& problem, const VectorXd& x, const VectorXd& theta_c);

/// Factorized equality KKT matrix, reusable across parameter points.
class EqualityFactor {
public:
    /// `problem` must outlive the factor.
    explicit EqualityFactor(const QpProblem& problem);

    EqualitySolution solve(const ParamPoint& p, const VectorXd* mu = nullptr) const;
    MatrixXd inverse() const { return lu_.inverse(); }
    double rcond() const { return lu_.rcond(); }

private:
    const QpProblem* problem_;
    DenseLu lu_;
};

/// Factorized expanded KKT matrix for one active set.
class RegionFactor {
public:
    /// `problem` must outlive the factor. With check_rank off, dependent
    /// rows surface as SingularKkt from the factorization instead.
    RegionFactor(const QpProblem& problem, ActiveSet active, bool check_rank = true);

    FullSolution solve(const ParamPoint& p) const;
    SlopeMatrix slopes() const;
    const ActiveSet& active() const { return active_; }

private:
    const QpProblem* problem_;
    ActiveSet active_;
    DenseLu lu_;
};

}  // namespace mpqp
