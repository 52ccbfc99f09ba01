#pragma once

#include "mpqp/problem.hpp"

namespace mpqp::test {

// Two identical unit-curvature variables sharing a demand θ_e:
//   min x1² + x2²  s.t.  x1 + x2 = θ_e,  x1 <= 0.3,  x2 <= 0.8
inline QpProblem tiny() {
    QpProblem p;
    p.Q = MatrixXd::Identity(2, 2);
    p.C = VectorXd::Zero(2);
    p.Ae = MatrixXd::Ones(1, 2);
    p.be = VectorXd::Zero(1);
    p.Ac = MatrixXd::Identity(2, 2);
    p.bc = (VectorXd(2) << 0.3, 0.8).finished();
    p.varying = {false, false, true, false, false};
    return p;
}

inline ParamPoint tiny_point(const QpProblem& p, double demand) {
    ParamPoint pt = ParamPoint::zero(p);
    pt.theta_e[0] = demand;
    return pt;
}

// min x²  s.t.  x = b
inline QpProblem scalar(double b) {
    QpProblem p;
    p.Q = MatrixXd::Ones(1, 1);
    p.C = VectorXd::Zero(1);
    p.Ae = MatrixXd::Ones(1, 1);
    p.be = VectorXd::Constant(1, b);
    p.Ac = MatrixXd::Zero(0, 1);
    p.bc = VectorXd::Zero(0);
    p.varying = {false, true};
    return p;
}

}  // namespace mpqp::test
