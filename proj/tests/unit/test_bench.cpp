#include <doctest.h>

#include "fixtures.hpp"
#include "mpqp/bench.hpp"
#include "mpqp/errors.hpp"

#include <sstream>

using namespace mpqp;
using mpqp::test::tiny;

namespace {

struct SixBus {
    GridCase grid = load_case("case6");
    QpProblem problem = build_qp(grid);
    RegionAtlas atlas = discover(problem, VectorXd::Constant(3, 0.01), 0, grid.total_capacity());
    LabeledDataset train = populate(atlas, 200, 1);
    PsnnModel psnn{init_mu_net(atlas, train, 0, InitMode::WarmStart), problem};
};

const SixBus& six() {
    static const SixBus s;
    return s;
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("quantiles") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
    CHECK(quantile({5.0}, 0.25) == 5.0);
    CHECK(quantile({1.0, 2.0}, 1.0) == 2.0);
    CHECK(std::isnan(quantile({}, 0.5)));
    CHECK_THROWS_AS(quantile({1.0}, 1.5), ValidationError);
    CHECK(median_seconds([] {}, 3) >= 0.0);
}

TEST_CASE("benchmark report on the 6-bus case") {
    const SixBus& s = six();
    const DnnModel dnn = make_dnn(s.problem, {8}, 1);
    const std::map<std::string, MatrixXd> data{{"realistic", make_realistic_dataset(s.grid, 100, 7)},
                                               {"extreme", make_extreme_dataset(s.grid, 60, 7)}};
    BenchOptions opts;
    opts.timing_runs = 1;
    const BenchReport r = benchmark(s.problem, "case6", s.psnn, &dnn, data, opts);
    REQUIRE(r.rows.size() == 6);
    for (const auto& m : r.rows) {
        for (std::size_t k = 1; k < 5; ++k) CHECK(m.gap[k - 1] <= m.gap[k]);
        CHECK(m.seconds > 0.0);
        CHECK(m.rows == 100 - r.infeasible.at(m.dataset) + (m.dataset == "extreme" ? -40 : 0));
    }
    for (const std::string ds : {"realistic", "extreme"}) {
        const MethodMetrics& o = r.find("oracle", ds);
        CHECK(o.kkt.max() < 1e-10);
        CHECK(o.gap[0] == 0.0);
        CHECK(o.gap[4] == 0.0);
        CHECK(r.find("psnn", ds).kkt.max() < 1e-9);
        CHECK(r.find("psnn", ds).abs_gap_median < 1e-4);
        CHECK(r.find("dnn", ds).kkt.kkt2_eq > r.find("psnn", ds).kkt.kkt2_eq);
    }
    CHECK_THROWS_AS(r.find("psnn", "nope"), ValidationError);

    json a = bench_to_json(r), b = bench_to_json(benchmark(s.problem, "case6", s.psnn, &dnn, data, opts));
    for (auto* j : {&a, &b})
        for (auto& row : (*j)["rows"]) row.erase("seconds");
    CHECK(a == b);

    const auto csv = split_csv(bench_to_csv(r));
    CHECK(csv.size() == 7);
    CHECK(csv[0].size() == csv[1].size());
    CHECK(bench_to_table(r).find("psnn") != std::string::npos);

    CHECK_THROWS_AS(benchmark(tiny(), "tiny", s.psnn, nullptr, {}, opts), FingerprintMismatch);
}

TEST_CASE("scaler files") {
    const std::vector<double> d = default_scalers();
    CHECK(d.size() == 24);
    CHECK(*std::max_element(d.begin(), d.end()) == 1.0);
    CHECK(read_scalers("# c\nhour,scaler\n0,0.5\n1,0.7\n") == std::vector<double>{0.5, 0.7});
    CHECK_THROWS_AS(read_scalers("hour,scaler\n0,abc\n"), ParseError);
    CHECK_THROWS_AS(read_scalers("0,-1\n"), ParseError);
    CHECK_THROWS_AS(read_scalers("# nothing\n"), ParseError);
}

TEST_CASE("uncertainty simulation") {
    const SixBus& s = six();
    SimConfig cfg;
    cfg.scalers = default_scalers();
    cfg.seed = 42;
    const SimResult r = simulate_uncertainty(s.psnn, s.grid, cfg);
    REQUIRE(r.rows() == 24 * 500);
    CHECK(r.renewables.maxCoeff() <= 1.5);
    CHECK(r.renewables.minCoeff() >= 0.0);
    CHECK(r.renewable_buses.size() == 1);
    CHECK(r.predict_seconds < 5.0);
    for (Index i = 0; i < r.rows(); ++i) {
        if (!r.kkt_pass[static_cast<std::size_t>(i)]) continue;
        for (Index g = 0; g < s.grid.num_generators(); ++g) {
            CHECK(r.solution.x(i, g) <= s.grid.generators[static_cast<std::size_t>(g)].p_max + 1e-6);
            CHECK(r.solution.x(i, g) >= s.grid.generators[static_cast<std::size_t>(g)].p_min - 1e-6);
        }
    }
    MESSAGE("simulation KKT failures: " << r.failures() << " of " << r.rows());

    const SimResult again = simulate_uncertainty(s.psnn, s.grid, cfg);
    CHECK(again.thetas == r.thetas);
    CHECK(again.solution.x == r.solution.x);

    SimConfig calm = cfg;
    calm.cap = 0.0;
    calm.samples_per_hour = 3;
    const SimResult c = simulate_uncertainty(s.psnn, s.grid, calm);
    for (Index i = 0; i < c.rows(); ++i) {
        const VectorXd det = cfg.scalers[static_cast<std::size_t>(c.hour[static_cast<std::size_t>(i)])] * s.grid.base_load();
        CHECK(c.thetas.row(i) == det.transpose());
        CHECK(c.solution.x.row(i) == s.psnn.predict_batch(s.problem, det.transpose()).x.row(0));
    }

    const auto dq = split_csv(dispatch_quantiles_csv(r, s.grid));
    CHECK(dq.size() == 1 + 24 * 3);
    const auto du = split_csv(dual_summary_csv(r, s.grid));
    CHECK(du.size() == 1 + 24 * 6);

    SimConfig bad = cfg;
    bad.renewable_buses = {1};  // generator bus without load
    CHECK_THROWS_AS(simulate_uncertainty(s.psnn, s.grid, bad), ValidationError);
    bad = cfg;
    bad.mean_reading = true;
    CHECK(simulate_uncertainty(s.psnn, s.grid, bad).renewables.mean() > r.renewables.mean());
}

TEST_CASE("sweep report") {
    const QpProblem p = tiny();
    const auto rows = split_csv(sweep_report(p, VectorXd::Zero(1), 0, 0.0, 1.2, 0.1));
    REQUIRE(rows.size() == 14);
    CHECK(rows[0] == std::vector<std::string>{"theta", "status", "mu_0", "mu_1"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double t = std::stod(rows[i][0]);
        if (t > 1.1 + 1e-9) {
            CHECK(rows[i][1] == "infeasible");
            continue;
        }
        CHECK(rows[i][1] == "optimal");
        CHECK(std::abs(std::stod(rows[i][2]) - std::max(0.0, 2 * t - 1.2)) < 1e-9);
    }
    CHECK(split_csv(sweep_report(p, VectorXd::Zero(1), 0, 1.0, 0.0, 0.1)).size() == 1);

    // 6-bus: binding pattern switches only near atlas boundaries
    const SixBus& s = six();
    const auto six_rows = split_csv(sweep_report(s.problem, VectorXd::Constant(3, 0.01), 0, 0.0, 5.0, 0.1));
    std::string prev;
    for (std::size_t i = 1; i < six_rows.size(); ++i) {
        std::string pattern;
        for (std::size_t j = 2; j < six_rows[i].size(); ++j)
            pattern += (!six_rows[i][j].empty() && std::stod(six_rows[i][j]) > 1e-9) ? '1' : '0';
        if (i > 1 && pattern != prev) {
            const double t = std::stod(six_rows[i][0]);
            double nearest = 1e9;
            for (const auto& reg : s.atlas.regions) nearest = std::min(nearest, std::abs(reg.lo[0] - t));
            CHECK(nearest <= 0.1 + 1e-9);
        }
        prev = pattern;
    }
}
