#include <doctest.h>

#include "fixtures.hpp"
#include "mpqp/errors.hpp"
#include "mpqp/io.hpp"
#include "mpqp/qp_core.hpp"

#include <random>

using namespace mpqp;
using mpqp::test::tiny;
using mpqp::test::tiny_point;

namespace {

// Independent route for TINY: minimize x1² + (θ - x1)² over the feasible
// interval of x1 by golden-section search (test-only oracle).
std::pair<double, double> tiny_brute_force(double theta) {
    const double lo = std::max(-10.0, theta - 0.8), hi = 0.3;
    auto f = [theta](double x1) { return x1 * x1 + (theta - x1) * (theta - x1); };
    double a = lo, b = hi;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        (f(c) < f(d) ? b : a) = (f(c) < f(d) ? d : c);
    }
    const double x1 = 0.5 * (a + b);
    return {x1, theta - x1};
}

}  // namespace

TEST_CASE("assemble_kkt block layout") {
    const QpProblem p = tiny();
    const MatrixXd J = assemble_kkt(p);
    MatrixXd expected(3, 3);
    expected << 2, 0, -1, 0, 2, -1, -1, -1, 0;
    CHECK(J == expected);

    const QpProblem s = mpqp::test::scalar(1.0);
    MatrixXd js(2, 2);
    js << 2, -1, -1, 0;
    CHECK(assemble_kkt(s) == js);
}

TEST_CASE("solve_equality closed forms") {
    for (double b : {-2.0, 0.0, 0.7, 3.5}) {
        const QpProblem s = mpqp::test::scalar(b);
        const auto sol = solve_equality(s, ParamPoint::zero(s));
        CHECK(sol.x[0] == doctest::Approx(b).epsilon(1e-14));
        CHECK(sol.lambda[0] == doctest::Approx(2 * b).epsilon(1e-14));
    }
    const QpProblem p = tiny();
    const auto sol = solve_equality(p, tiny_point(p, 1.0));
    CHECK(std::abs(sol.x[0] - 0.5) < 1e-14);
    CHECK(std::abs(sol.x[1] - 0.5) < 1e-14);
    CHECK(std::abs(sol.lambda[0] - 1.0) < 1e-14);
}

TEST_CASE("solve_equality rejects a singular KKT matrix") {
    QpProblem p = tiny();
    p.Q.setZero();  // no curvature on the nullspace of Ae
    CHECK_THROWS_AS(solve_equality(p, tiny_point(p, 1.0)), SingularKkt);
}

TEST_CASE("assemble_expanded_kkt") {
    const QpProblem p = tiny();
    CHECK(assemble_expanded_kkt(p, ActiveSet{}) == assemble_kkt(p));

    const MatrixXd J0 = assemble_expanded_kkt(p, ActiveSet{0});
    MatrixXd expected(4, 4);
    expected << 2, 0, -1, 1, 0, 2, -1, 0, -1, -1, 0, 0, 1, 0, 0, 0;
    CHECK(J0 == expected);

    // Three rows in two dimensions cannot be independent.
    CHECK_THROWS_AS(assemble_expanded_kkt(p, ActiveSet{0, 1}), DegenerateActiveSet);

    QpProblem dup = p;
    dup.Ac.resize(3, 2);
    dup.Ac << 1, 0, 0, 1, -1, 0;
    dup.bc = (VectorXd(3) << 0.3, 0.8, 0.0).finished();
    dup.varying = {false, false, true, false, false, false};
    CHECK_THROWS_AS(assemble_expanded_kkt(dup, ActiveSet{0, 2}), DegenerateActiveSet);
}

TEST_CASE("region_solution fixtures") {
    const QpProblem p = tiny();

    // Hand-expanded KKT for B={0}: x1 = 0.3, x1 + x2 = θ,
    // 2x2 - λ = 0, 2x1 - λ + μ1 = 0  ->  x2 = θ - 0.3, λ = 2θ - 0.6, μ1 = 2θ - 1.2.
    const auto s = region_solution(p, ActiveSet{0}, tiny_point(p, 1.0));
    const auto [bx1, bx2] = tiny_brute_force(1.0);
    CHECK(std::abs(s.x[0] - 0.3) < 1e-14);
    CHECK(std::abs(s.x[1] - 0.7) < 1e-14);
    CHECK(std::abs(s.x[0] - bx1) < 1e-7);
    CHECK(std::abs(s.x[1] - bx2) < 1e-7);
    CHECK(std::abs(s.lambda[0] - 1.4) < 1e-14);
    CHECK(std::abs(s.mu[0] - 0.8) < 1e-14);
    CHECK(s.mu[1] == 0.0);

    const auto interior = region_solution(p, ActiveSet{}, tiny_point(p, 0.4));
    CHECK(std::abs(interior.x[0] - 0.2) < 1e-14);
    CHECK(std::abs(interior.x[1] - 0.2) < 1e-14);
    CHECK(std::abs(interior.lambda[0] - 0.4) < 1e-14);
    CHECK(interior.mu.isZero(0.0));

    const auto wrong = region_solution(p, ActiveSet{0}, tiny_point(p, 0.4));
    CHECK(std::abs(wrong.x[0] - 0.3) < 1e-14);
    CHECK(std::abs(wrong.x[1] - 0.1) < 1e-14);
    CHECK(std::abs(wrong.mu[0] + 0.4) < 1e-14);
}

TEST_CASE("slope_matrix") {
    const QpProblem p = tiny();
    const SlopeMatrix sm = slope_matrix(p, ActiveSet{0});
    REQUIRE(sm.slopes.rows() == 1);
    REQUIRE(sm.slopes.cols() == 1);
    CHECK(std::abs(sm.slopes(0, 0) - 2.0) < 1e-14);
    CHECK(std::abs(sm.intercept[0] + 1.2) < 1e-14);

    const SlopeMatrix empty = slope_matrix(p, ActiveSet{});
    CHECK(empty.slopes.rows() == 0);
    CHECK(empty.intercept.size() == 0);
}

TEST_CASE("solution_from_mu") {
    const QpProblem p = tiny();
    const VectorXd mu08 = (VectorXd(2) << 0.8, 0.0).finished();
    const auto a = solution_from_mu(p, mu08, tiny_point(p, 1.0));
    const auto ref = region_solution(p, ActiveSet{0}, tiny_point(p, 1.0));
    CHECK((a.x - ref.x).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(a.lambda[0] - 1.4) < 1e-14);

    const auto zero = solution_from_mu(p, VectorXd::Zero(2), tiny_point(p, 0.4));
    CHECK(std::abs(zero.x[0] - 0.2) < 1e-14);
    CHECK(std::abs(zero.x[1] - 0.2) < 1e-14);

    // 2x1 - λ + 0.5 = 0, 2x2 - λ = 0, x1 + x2 = 1  ->  x = (0.375, 0.625)
    const VectorXd mu05 = (VectorXd(2) << 0.5, 0.0).finished();
    const auto off = solution_from_mu(p, mu05, tiny_point(p, 1.0));
    CHECK(std::abs(off.x[0] - 0.375) < 1e-14);
    CHECK(std::abs(off.x[1] - 0.625) < 1e-14);
    CHECK(off.x[0] > 0.3);
}

TEST_CASE("objective") {
    const QpProblem p = tiny();
    const VectorXd tc = VectorXd::Zero(2);
    CHECK(objective(p, (VectorXd(2) << 0.5, 0.5).finished(), tc) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(objective(p, (VectorXd(2) << 0.3, 0.7).finished(), tc) == doctest::Approx(0.58).epsilon(1e-15));
}

TEST_CASE("affinity and consistency properties") {
    const QpProblem p = tiny();
    std::mt19937_64 gen(20240511);
    std::uniform_real_distribution<double> demand(-2.0, 3.0), dual(-1.0, 2.0);

    for (int trial = 0; trial < 100; ++trial) {
        const double ta = demand(gen), tb = demand(gen);
        const VectorXd mu = (VectorXd(2) << dual(gen), dual(gen)).finished();
        const auto a = solution_from_mu(p, mu, tiny_point(p, ta));
        const auto b = solution_from_mu(p, mu, tiny_point(p, tb));
        const auto m = solution_from_mu(p, mu, tiny_point(p, 0.5 * (ta + tb)));
        CHECK((m.x - 0.5 * (a.x + b.x)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((m.lambda - 0.5 * (a.lambda + b.lambda)).cwiseAbs().maxCoeff() < 1e-10);

        for (const ActiveSet& set : {ActiveSet{}, ActiveSet{0}, ActiveSet{1}}) {
            const auto r = region_solution(p, set, tiny_point(p, ta));
            const auto g = solution_from_mu(p, r.mu, tiny_point(p, ta));
            CHECK((r.x - g.x).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((r.lambda - g.lambda).cwiseAbs().maxCoeff() < 1e-10);

            const SlopeMatrix sm = slope_matrix(p, set);
            const VectorXd mu_b = sm.slopes * VectorXd::Constant(1, ta) + sm.intercept;
            for (std::size_t k = 0; k < set.size(); ++k)
                CHECK(std::abs(mu_b[static_cast<Index>(k)] - r.mu[set.indices()[k]]) < 1e-10);
        }
    }
}

TEST_CASE("QpProblem validation and JSON round trip") {
    QpProblem p = tiny();
    CHECK_NOTHROW(p.validate());

    QpProblem asym = p;
    asym.Q(0, 1) = 1e-6;
    CHECK_THROWS_AS(asym.validate(), ValidationError);

    QpProblem indefinite = p;
    indefinite.Q(0, 0) = -1.0;
    CHECK_THROWS_AS(indefinite.validate(), ValidationError);

    QpProblem deficient = p;
    deficient.Ae.resize(2, 2);
    deficient.Ae << 1, 1, 2, 2;
    deficient.be = VectorXd::Zero(2);
    deficient.varying = {false, false, true, false, false, false};
    CHECK_THROWS_AS(deficient.validate(), ValidationError);

    p.primary_block = 1;
    const QpProblem back = problem_from_json(json::parse(problem_to_json(p).dump()));
    CHECK(back.Q == p.Q);
    CHECK(back.Ae == p.Ae);
    CHECK(back.Ac == p.Ac);
    CHECK(back.bc == p.bc);
    CHECK(back.varying == p.varying);
    CHECK(back.primary_block == p.primary_block);
    CHECK(fingerprint(back) == fingerprint(p));
}

TEST_CASE("ParamPoint varying slots") {
    const QpProblem p = tiny();
    const ParamPoint pt = ParamPoint::from_varying(p, VectorXd::Constant(1, 0.9));
    CHECK(pt.theta_e[0] == 0.9);
    CHECK(pt.theta_c.isZero(0.0));
    CHECK(pt.varying(p)[0] == 0.9);
    CHECK_THROWS_AS(ParamPoint::from_varying(p, VectorXd::Zero(2)), ValidationError);
    CHECK_THROWS_AS(ActiveSet({1, 0}), ValidationError);
}
