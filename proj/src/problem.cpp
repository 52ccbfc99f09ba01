#include "mpqp/problem.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mpqp {

std::vector<Index> QpProblem::varying_slots() const {
    std::vector<Index> slots;
    for (std::size_t i = 0; i < varying.size(); ++i) {
        if (varying[i]) slots.push_back(static_cast<Index>(i));
    }
    return slots;
}

void QpProblem::validate() const {
    const Index nv = n();
    auto fail = [](const std::string& msg) { throw ValidationError("QpProblem: " + msg); };

    if (nv == 0) fail("no decision variables");
    if (Q.cols() != nv) fail("Q must be square");
    if (C.size() != nv) fail("C has wrong length");
    if (Ae.rows() > 0 && Ae.cols() != nv) fail("Ae has wrong column count");
    if (be.size() != m1()) fail("be has wrong length");
    if (Ac.rows() > 0 && Ac.cols() != nv) fail("Ac has wrong column count");
    if (bc.size() != m2()) fail("bc has wrong length");
    if (static_cast<Index>(varying.size()) != num_params())
        fail("varying mask must cover n + m1 + m2 parameter slots");
    if (primary_block && (*primary_block < 0 || *primary_block > nv)) fail("primary block out of range");
    if (!Q.allFinite() || !C.allFinite() || !Ae.allFinite() || !be.allFinite() || !Ac.allFinite() ||
        !bc.allFinite() || !std::isfinite(C0))
        fail("non-finite coefficient");

    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12) fail("Q is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Q, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10) fail("Q is not positive semidefinite");
    if (m1() > 0 && numeric_rank(Ae) < m1()) fail("Ae is rank deficient");
}

ParamPoint ParamPoint::zero(const QpProblem& problem) {
    return {VectorXd::Zero(problem.n()), VectorXd::Zero(problem.m1()), VectorXd::Zero(problem.m2())};
}

ParamPoint ParamPoint::from_varying(const QpProblem& problem, std::span<const double> values) {
    const auto slots = problem.varying_slots();
    if (values.size() != slots.size())
        throw ValidationError("ParamPoint: expected " + std::to_string(slots.size()) +
                              " varying values, got " + std::to_string(values.size()));
    ParamPoint p = zero(problem);
    for (std::size_t k = 0; k < slots.size(); ++k) p.set_varying(problem, static_cast<Index>(k), values[k]);
    return p;
}

ParamPoint ParamPoint::from_varying(const QpProblem& problem, const VectorXd& values) {
    return from_varying(problem, std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

VectorXd ParamPoint::stacked() const {
    VectorXd s(theta_c.size() + theta_e.size() + theta_C.size());
    s << theta_c, theta_e, theta_C;
    return s;
}

namespace {

double& slot_ref(ParamPoint& p, const QpProblem& problem, Index slot) {
    if (slot < problem.n()) return p.theta_c[slot];
    slot -= problem.n();
    if (slot < problem.m1()) return p.theta_e[slot];
    return p.theta_C[slot - problem.m1()];
}

}  // namespace

VectorXd ParamPoint::varying(const QpProblem& problem) const {
    const auto slots = problem.varying_slots();
    const VectorXd s = stacked();
    VectorXd out(static_cast<Index>(slots.size()));
    for (std::size_t k = 0; k < slots.size(); ++k) out[static_cast<Index>(k)] = s[slots[k]];
    return out;
}

void ParamPoint::set_varying(const QpProblem& problem, Index k, double value) {
    const auto slots = problem.varying_slots();
    if (k < 0 || k >= static_cast<Index>(slots.size())) throw ValidationError("varying axis out of range");
    slot_ref(*this, problem, slots[static_cast<std::size_t>(k)]) = value;
}

double ParamPoint::get_varying(const QpProblem& problem, Index k) const {
    const auto slots = problem.varying_slots();
    if (k < 0 || k >= static_cast<Index>(slots.size())) throw ValidationError("varying axis out of range");
    return stacked()[slots[static_cast<std::size_t>(k)]];
}

void ParamPoint::check(const QpProblem& problem) const {
    if (theta_c.size() != problem.n() || theta_e.size() != problem.m1() || theta_C.size() != problem.m2())
        throw ValidationError("ParamPoint dimensions do not match the problem");
}

ActiveSet::ActiveSet(std::initializer_list<Index> indices) : ActiveSet(std::vector<Index>(indices)) {}

ActiveSet::ActiveSet(std::vector<Index> indices) : indices_(std::move(indices)) {
    for (std::size_t i = 1; i < indices_.size(); ++i) {
        if (indices_[i] <= indices_[i - 1])
            throw ValidationError("ActiveSet indices must be strictly increasing");
    }
    if (!indices_.empty() && indices_.front() < 0) throw ValidationError("ActiveSet index is negative");
}

bool ActiveSet::contains(Index j) const { return std::binary_search(indices_.begin(), indices_.end(), j); }

Index ActiveSet::position(Index j) const {
    auto it = std::lower_bound(indices_.begin(), indices_.end(), j);
    if (it == indices_.end() || *it != j) return -1;
    return static_cast<Index>(it - indices_.begin());
}

void ActiveSet::check(Index m2) const {
    if (!indices_.empty() && indices_.back() >= m2)
        throw ValidationError("ActiveSet index " + std::to_string(indices_.back()) + " exceeds m2");
}

std::string ActiveSet::key() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t i = 0; i < indices_.size(); ++i) os << (i ? "," : "") << indices_[i];
    os << '}';
    return os.str();
}

ActiveSet active_set_from_mu(const VectorXd& mu, double threshold) {
    std::vector<Index> idx;
    for (Index j = 0; j < mu.size(); ++j) {
        if (mu[j] > threshold) idx.push_back(j);
    }
    return ActiveSet(std::move(idx));
}

}  // namespace mpqp
