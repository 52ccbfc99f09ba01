#pragma once

#include <Eigen/Dense>

#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mpqp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/**
 * Linearly constrained multiparametric QP
 *
 *   minimize    xᵀQx + (C + θ_c)ᵀx + C0
 *   subject to  Ae x  = be + θ_e     [λ]
 *               Ac x <= bc + θ_C     [μ]
 *
 * The parameter vector is the stack [θ_c; θ_e; θ_C]. `varying` flags the
 * slots that change at runtime; every other slot is held at zero by the
 * parametric machinery (slopes, networks, datasets).
 */
struct QpProblem {
    MatrixXd Q;
    VectorXd C;
    double C0 = 0.0;
    MatrixXd Ae;
    VectorXd be;
    MatrixXd Ac;
    VectorXd bc;
    std::vector<bool> varying;

    /// When set, the first `primary_block` primal variables form the
    /// generator block and the rest the angle block for the KKT report.
    std::optional<Index> primary_block;

    Index n() const { return Q.rows(); }
    Index m1() const { return Ae.rows(); }
    Index m2() const { return Ac.rows(); }
    Index num_params() const { return n() + m1() + m2(); }

    /// Stacked-parameter slots flagged as varying, in increasing order.
    std::vector<Index> varying_slots() const;
    Index num_varying() const { return static_cast<Index>(varying_slots().size()); }

    /// Throws ValidationError on dimension mismatch, asymmetric or indefinite Q,
    /// or rank-deficient Ae.
    void validate() const;
};

/// Additive right-hand-side perturbations for one problem instance.
struct ParamPoint {
    VectorXd theta_c;
    VectorXd theta_e;
    VectorXd theta_C;

    static ParamPoint zero(const QpProblem& problem);
    /// Varying slots taken from `values`, all other slots zero.
    static ParamPoint from_varying(const QpProblem& problem, std::span<const double> values);
    static ParamPoint from_varying(const QpProblem& problem, const VectorXd& values);

    VectorXd stacked() const;
    VectorXd varying(const QpProblem& problem) const;
    void set_varying(const QpProblem& problem, Index k, double value);
    double get_varying(const QpProblem& problem, Index k) const;
    void check(const QpProblem& problem) const;
};

struct FullSolution {
    VectorXd x;
    VectorXd lambda;
    VectorXd mu;
};

/// Primal plus equality duals; the output of the equality solution function.
struct EqualitySolution {
    VectorXd x;
    VectorXd lambda;
};

/// Strictly increasing set of inequality-constraint indices.
class ActiveSet {
public:
    ActiveSet() = default;
    ActiveSet(std::initializer_list<Index> indices);
    explicit ActiveSet(std::vector<Index> indices);

    const std::vector<Index>& indices() const { return indices_; }
    std::size_t size() const { return indices_.size(); }
    bool empty() const { return indices_.empty(); }
    bool contains(Index j) const;
    /// Position of constraint j inside the set, or -1.
    Index position(Index j) const;
    void check(Index m2) const;

    std::string key() const;

    auto begin() const { return indices_.begin(); }
    auto end() const { return indices_.end(); }

    friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
    friend auto operator<=>(const ActiveSet&, const ActiveSet&) = default;

private:
    std::vector<Index> indices_;
};

/// Binding set read off a dual vector: { j : mu_j > threshold }.
ActiveSet active_set_from_mu(const VectorXd& mu, double threshold = 1e-9);

}  // namespace mpqp
