#include "mpqp/linalg.hpp"

#include "mpqp/errors.hpp"

#include <cmath>
#include <sstream>

namespace mpqp {

DenseLu::DenseLu(const Eigen::MatrixXd& a, const std::string& what, double min_rcond) {
    if (a.rows() != a.cols()) throw SingularKkt(what + ": matrix is not square");
    if (a.rows() == 0) return;
    lu_.compute(a);
    rcond_ = lu_.rcond();
    if (!std::isfinite(rcond_) || rcond_ < min_rcond) {
        std::ostringstream os;
        os << what << ": matrix is numerically singular (rcond " << rcond_ << ")";
        throw SingularKkt(os.str());
    }
}

Eigen::Index numeric_rank(const Eigen::MatrixXd& a, double tol) {
    if (a.size() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& s = svd.singularValues();
    const double cut = tol * std::max(1.0, s[0]);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] > cut) ++r;
    }
    return r;
}

}  // namespace mpqp
