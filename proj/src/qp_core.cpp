#include "mpqp/qp_core.hpp"

#include "mpqp/errors.hpp"

namespace mpqp {

namespace {

MatrixXd binding_rows(const QpProblem& problem, const ActiveSet& active) {
    MatrixXd rows(static_cast<Index>(active.size()), problem.n());
    Index r = 0;
    for (Index j : active) rows.row(r++) = problem.Ac.row(j);
    return rows;
}

void check_licq(const QpProblem& problem, const ActiveSet& active) {
    if (active.empty()) return;
    MatrixXd stacked(problem.m1() + static_cast<Index>(active.size()), problem.n());
    stacked << problem.Ae, binding_rows(problem, active);
    if (numeric_rank(stacked) < stacked.rows())
        throw DegenerateActiveSet("active set " + active.key() + " has linearly dependent constraint rows");
}

}  // namespace

MatrixXd assemble_kkt(const QpProblem& problem) {
    const Index n = problem.n(), m1 = problem.m1();
    MatrixXd J = MatrixXd::Zero(n + m1, n + m1);
    J.topLeftCorner(n, n) = 2.0 * problem.Q;
    J.topRightCorner(n, m1) = -problem.Ae.transpose();
    J.bottomLeftCorner(m1, n) = -problem.Ae;
    return J;
}

namespace {

MatrixXd expanded_kkt_unchecked(const QpProblem& problem, const ActiveSet& active) {
    const Index n = problem.n(), m1 = problem.m1(), nb = static_cast<Index>(active.size());
    MatrixXd J = MatrixXd::Zero(n + m1 + nb, n + m1 + nb);
    J.topLeftCorner(n + m1, n + m1) = assemble_kkt(problem);
    if (nb > 0) {
        const MatrixXd AB = binding_rows(problem, active);
        J.block(0, n + m1, n, nb) = AB.transpose();
        J.block(n + m1, 0, nb, n) = AB;
    }
    return J;
}

}  // namespace

MatrixXd assemble_expanded_kkt(const QpProblem& problem, const ActiveSet& active) {
    active.check(problem.m2());
    check_licq(problem, active);
    return expanded_kkt_unchecked(problem, active);
}

EqualityFactor::EqualityFactor(const QpProblem& problem)
    : problem_(&problem), lu_(assemble_kkt(problem), "equality KKT matrix") {}

EqualitySolution EqualityFactor::solve(const ParamPoint& p, const VectorXd* mu) const {
    const QpProblem& pr = *problem_;
    p.check(pr);
    VectorXd rhs(pr.n() + pr.m1());
    rhs.head(pr.n()) = -pr.C - p.theta_c;
    if (mu) {
        if (mu->size() != pr.m2()) throw ValidationError("mu has wrong length");
        rhs.head(pr.n()) -= pr.Ac.transpose() * (*mu);
    }
    rhs.tail(pr.m1()) = -pr.be - p.theta_e;
    const VectorXd z = lu_.solve(rhs);
    return {z.head(pr.n()), z.tail(pr.m1())};
}

EqualitySolution solve_equality(const QpProblem& problem, const ParamPoint& p) {
    return EqualityFactor(problem).solve(p);
}

EqualitySolution solution_from_mu(const QpProblem& problem, const VectorXd& mu, const ParamPoint& p) {
    return EqualityFactor(problem).solve(p, &mu);
}

RegionFactor::RegionFactor(const QpProblem& problem, ActiveSet active, bool check_rank)
    : problem_(&problem), active_(std::move(active)) {
    const MatrixXd J = check_rank ? assemble_expanded_kkt(problem, active_) : expanded_kkt_unchecked(problem, active_);
    lu_ = DenseLu(J, "expanded KKT matrix " + active_.key());
}

FullSolution RegionFactor::solve(const ParamPoint& p) const {
    const QpProblem& pr = *problem_;
    p.check(pr);
    const Index n = pr.n(), m1 = pr.m1(), nb = static_cast<Index>(active_.size());
    VectorXd rhs(n + m1 + nb);
    rhs.head(n) = -pr.C - p.theta_c;
    rhs.segment(n, m1) = -pr.be - p.theta_e;
    Index r = n + m1;
    for (Index j : active_) rhs[r++] = pr.bc[j] + p.theta_C[j];

    const VectorXd z = lu_.solve(rhs);
    FullSolution s{z.head(n), z.segment(n, m1), VectorXd::Zero(pr.m2())};
    r = n + m1;
    for (Index j : active_) s.mu[j] = z[r++];
    return s;
}

SlopeMatrix RegionFactor::slopes() const {
    const QpProblem& pr = *problem_;
    const Index n = pr.n(), m1 = pr.m1(), nb = static_cast<Index>(active_.size());
    const auto slots = pr.varying_slots();
    SlopeMatrix out{MatrixXd::Zero(nb, static_cast<Index>(slots.size())), VectorXd::Zero(nb)};
    if (nb == 0) return out;

    // J_B is symmetric, so the μ-rows of its inverse are the transposed μ-columns.
    MatrixXd unit = MatrixXd::Zero(n + m1 + nb, nb);
    unit.bottomRows(nb).setIdentity();
    const MatrixXd mu_rows = lu_.solve(unit).transpose();

    VectorXd rhs0(n + m1 + nb);
    rhs0.head(n) = -pr.C;
    rhs0.segment(n, m1) = -pr.be;
    Index r = n + m1;
    for (Index j : active_) rhs0[r++] = pr.bc[j];
    out.intercept = mu_rows * rhs0;

    // θ_c and θ_e enter the right-hand side negated, θ_B positively.
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const Index slot = slots[k];
        const Index col = static_cast<Index>(k);
        if (slot < n + m1) {
            out.slopes.col(col) = -mu_rows.col(slot);
        } else {
            const Index pos = active_.position(slot - n - m1);
            if (pos >= 0) out.slopes.col(col) = mu_rows.col(n + m1 + pos);
        }
    }
    return out;
}

FullSolution region_solution(const QpProblem& problem, const ActiveSet& active, const ParamPoint& p) {
    return RegionFactor(problem, active).solve(p);
}

SlopeMatrix slope_matrix(const QpProblem& problem, const ActiveSet& active) {
    return RegionFactor(problem, active).slopes();
}

double objective(const QpProblem& problem, const VectorXd& x, const VectorXd& theta_c) {
    if (x.size() != problem.n() || theta_c.size() != problem.n())
        throw ValidationError("objective: dimension mismatch");
    return x.dot(problem.Q * x) + (problem.C + theta_c).dot(x) + problem.C0;
}

}  // namespace mpqp
