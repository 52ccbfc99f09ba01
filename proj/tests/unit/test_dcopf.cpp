#include <doctest.h>

#include "mpqp/dcopf.hpp"
#include "mpqp/errors.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/qp_core.hpp"
#include "mpqp/rng.hpp"

#include <set>

using namespace mpqp;

namespace {

const char* kToyTable = R"(function mpc = toy
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0;
	2	1	50	0;
];
mpc.gen = [
	1	0	0	0	0	1	100	1	100	0;
];
mpc.branch = [
	1	2	0	0.1	0	0	0	0	0	0	1;
];
mpc.gencost = [
	2	0	0	3	0.0001	0.01	0;
];
)";

}  // namespace

TEST_CASE("toy case from a table matches the builtin toy") {
    GridCase c = parse_matpower(kToyTable, 1.0, "toy2");
    const GridCase toy = toy_case();
    CHECK(c.buses == toy.buses);
    CHECK(c.branches == toy.branches);
    CHECK(c.reference_bus == toy.reference_bus);
    REQUIRE(c.generators.size() == 1);
    // $/MW² and $/MW become per-unit coefficients through powers of baseMVA.
    CHECK(c.generators[0].cost_quadratic == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.generators[0].cost_linear == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.generators[0].p_max == 1.0);

    const QpProblem p = build_qp(c);
    CHECK(p.n() == 3);
    CHECK(p.m1() == 3);
    CHECK(p.m2() == 2);
    MatrixXd B(2, 2);
    B << 10, -10, -10, 10;
    CHECK(susceptance_matrix(c).isApprox(B, 1e-15));
}

TEST_CASE("case validation") {
    GridCase c = toy_case();
    c.generators[0].cost_quadratic = 0.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = toy_case();
    c.buses.push_back({3, 0.1});
    CHECK_THROWS_AS(c.validate(), ValidationError);  // bus 3 unreachable

    c = toy_case();
    c.generators[0].p_min = 2.0;
    CHECK_THROWS_AS(c.validate(), ValidationError);

    c = toy_case();
    c.generators[0].bus = 9;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("table parse errors carry line context") {
    std::string bad = kToyTable;
    bad.replace(bad.find("0.1\t0\t0"), 3, "x.y");
    try {
        parse_matpower(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 11") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_matpower("mpc.bus = [\n1 3 0 0;\n"), ParseError);
    CHECK_THROWS_AS(parse_case("{ not json"), ParseError);
}

TEST_CASE("shipped cases load with the documented dimensions") {
    const GridCase c6 = load_case("case6");
    CHECK(c6.num_buses() == 6);
    CHECK(c6.num_generators() == 3);
    CHECK(build_qp(c6).m2() == 6);
    CHECK(c6.load_buses().size() == 3);

    const GridCase c30 = load_case("case30");
    CHECK(c30.num_buses() == 30);
    CHECK(c30.num_generators() == 6);
    const GridCase c57 = load_case("case57");
    CHECK(c57.num_buses() == 57);
    CHECK(c57.num_generators() == 7);

    // The JSON fixture is the tabular source at cost scale 0.01.
    const GridCase from_table = parse_matpower(read_text(data_dir() / "cases" / "case6.m"), 0.01, "case6");
    CHECK(from_table == c6);
}

TEST_CASE("case JSON round trip") {
    for (const char* name : {"toy2", "case6", "case30"}) {
        const GridCase c = load_case(name);
        CHECK(case_from_json(json::parse(case_to_json(c).dump())) == c);
    }
}

TEST_CASE("susceptance matrix is a symmetric PSD Laplacian") {
    for (const char* name : {"case6", "case30", "case57"}) {
        const MatrixXd B = susceptance_matrix(load_case(name));
        CHECK((B - B.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(B.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
        CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(B).eigenvalues().minCoeff() > -1e-10);
    }
}

TEST_CASE("6-bus KKT structure") {
    const GridCase c = load_case("case6");
    const QpProblem p = build_qp(c);
    const MatrixXd J = assemble_kkt(p);
    CHECK(J.rows() == p.n() + p.m1());
    for (Index i = 0; i < p.n(); ++i)
        for (Index k = 0; k < p.n(); ++k) {
            const double expected = (i == k && i < 3) ? 2.0 * c.generators[static_cast<std::size_t>(i)].cost_quadratic : 0.0;
            CHECK(J(i, k) == expected);
        }
    CHECK(EqualityFactor(p).rcond() > 1e-10);
    CHECK(p.primary_block == Index{3});
    CHECK(p.num_varying() == 3);
}

TEST_CASE("balance rows move one for one with demand") {
    const GridCase c = load_case("case6");
    const QpProblem p = build_qp(c);
    const VectorXd x = VectorXd::LinSpaced(p.n(), 0.1, 0.9);
    const VectorXd d = c.base_load();
    for (Index k = 0; k < d.size(); ++k) {
        VectorXd up = d;
        up[k] += 1.0;
        const ParamPoint a = ParamPoint::from_varying(p, d), b = ParamPoint::from_varying(p, up);
        const VectorXd ra = a.theta_e - p.Ae * x, rb = b.theta_e - p.Ae * x;
        const Index row = c.load_buses()[static_cast<std::size_t>(k)];
        CHECK(std::abs(rb[row] - ra[row] - 1.0) < 1e-14);
        CHECK(std::abs((rb - ra).cwiseAbs().sum() - 1.0) < 1e-14);
    }
}

TEST_CASE("relaxed limits reduce the oracle to the equality solve") {
    GridCase c = load_case("case6");
    for (auto& g : c.generators) {
        g.p_min = -1e6;
        g.p_max = 1e6;
    }
    const QpProblem p = build_qp(c);
    const ParamPoint pt = ParamPoint::from_varying(p, c.base_load());
    const auto eq = solve_equality(p, pt);
    const OracleResult r = solve_active_set(p, pt);
    CHECK(r.active_set.empty());
    CHECK((eq.x - r.solution.x).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("oracle dispatch at base demand balances and respects limits") {
    for (const char* name : {"case6", "case30", "case57"}) {
        const GridCase c = load_case(name);
        const QpProblem p = build_qp(c);
        const ParamPoint pt = ParamPoint::from_varying(p, c.base_load());
        const OracleResult r = solve_active_set(p, pt);
        CHECK((p.Ae * r.solution.x - pt.theta_e).cwiseAbs().maxCoeff() < 1e-9);
        for (Index g = 0; g < c.num_generators(); ++g) {
            CHECK(r.solution.x[g] <= c.generators[static_cast<std::size_t>(g)].p_max + 1e-9);
            CHECK(r.solution.x[g] >= c.generators[static_cast<std::size_t>(g)].p_min - 1e-9);
        }
        CHECK(r.solution.x.head(c.num_generators()).sum() == doctest::Approx(c.base_load().sum()).epsilon(1e-12));
        const json j = oracle_result_to_json(r, p, pt);
        CHECK(std::abs(j["objective"].get<double>() - objective(p, r.solution.x, pt.theta_c)) < 1e-10);
    }
}

TEST_CASE("realistic dataset") {
    const GridCase c = load_case("case6");
    const MatrixXd d = make_realistic_dataset(c, 200, 5);
    CHECK(d.rows() == 200);
    CHECK(d == make_realistic_dataset(c, 200, 5));
    CHECK(d != make_realistic_dataset(c, 200, 6));
    const VectorXd base = c.base_load();
    const QpProblem p = build_qp(c);
    for (Index r = 0; r < d.rows(); ++r) {
        const double s = d(r, 0) / base[0];
        CHECK(s >= 0.6);
        CHECK(s < 1.4);
        CHECK((d.row(r).transpose() - s * base).cwiseAbs().maxCoeff() < 1e-15);
        if (r < 100) {
            const ParamPoint pt = ParamPoint::from_varying(p, VectorXd(d.row(r).transpose()));
            CHECK(is_optimal(kkt_report(p, pt, solve_active_set(p, pt).solution), 1e-8));
        }
    }
}

TEST_CASE("extreme dataset") {
    const GridCase c = load_case("case6");
    const MatrixXd d = make_extreme_dataset(c, 1000, 9);
    CHECK(d.rows() == 1000);
    CHECK(d == make_extreme_dataset(c, 1000, 9));
    const double hi = c.total_capacity();
    CHECK(hi == doctest::Approx(5.3));

    const QpProblem p = build_qp(c);
    Index infeasible = 0;
    for (Index r = 0; r < d.rows(); ++r) {
        Index off = 0, col = -1;
        for (Index k = 0; k < d.cols(); ++k)
            if (d(r, k) != 0.01) {
                ++off;
                col = k;
            }
        CHECK(off == 1);
        CHECK(col == r / 334);  // ⌈1000/3⌉ draws per bus, in bus order
        CHECK(d(r, col) < hi);
        try {
            solve_active_set(p, ParamPoint::from_varying(p, VectorXd(d.row(r).transpose())));
        } catch (const Infeasible&) {
            ++infeasible;
        }
    }
    // Demand above 5.3 - 0.02 cannot be served; about 0.4% of draws.
    MESSAGE("extreme 6-bus infeasible rows: " << infeasible);
    CHECK(infeasible < 30);
}

TEST_CASE("rng streams") {
    Rng a(1), b(1);
    for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng s1 = a.split(1), s2 = a.split(2);
    CHECK(s1.next_u64() != s2.next_u64());
    double mean = 0.0, top = 0.0;
    Rng e(3);
    for (int i = 0; i < 100000; ++i) {
        const double v = e.exponential(1.25);
        mean += v / 100000;
        top = std::max(top, v);
        CHECK(v >= 0.0);
    }
    CHECK(mean == doctest::Approx(0.8).epsilon(0.02));
    std::set<double> u;
    Rng r(4);
    for (int i = 0; i < 1000; ++i) {
        const double v = r.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        u.insert(v);
    }
    CHECK(u.size() == 1000);
}

TEST_CASE("30-bus oracles agree") {
    const GridCase c = load_case("case30");
    const QpProblem p = build_qp(c);
    const MatrixXd d = make_realistic_dataset(c, 100, 30);
    for (Index r = 0; r < d.rows(); ++r) {
        const ParamPoint pt = ParamPoint::from_varying(p, VectorXd(d.row(r).transpose()));
        const OracleResult a = solve_active_set(p, pt), e = solve_enumerate(p, pt);
        CHECK(a.active_set == e.active_set);
        CHECK((a.solution.x - e.solution.x).cwiseAbs().maxCoeff() < 1e-7);
    }
}
