#pragma once

#include <Eigen/Dense>

#include <string>

namespace mpqp {

/// Reciprocal-condition floor below which a system is declared singular.
inline constexpr double kMinRcond = 1e-12;

/// Dense LU with partial pivoting plus a reciprocal-condition estimate.
/// Construction throws SingularKkt when the estimate is below `min_rcond`.
class DenseLu {
public:
    DenseLu() = default;
    DenseLu(const Eigen::MatrixXd& a, const std::string& what, double min_rcond = kMinRcond);

    Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return lu_.solve(b); }
    Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return lu_.solve(b); }
    Eigen::MatrixXd inverse() const { return lu_.inverse(); }
    double rcond() const { return rcond_; }
    Eigen::Index size() const { return lu_.rows(); }

private:
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    double rcond_ = 0.0;
};

/// Numerical rank: singular values above tol · max(1, σ_max).
Eigen::Index numeric_rank(const Eigen::MatrixXd& a, double tol = 1e-10);

}  // namespace mpqp
