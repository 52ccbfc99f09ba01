#pragma once

#include "mpqp/baseline.hpp"
#include "mpqp/dcopf.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/psnn.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mpqp {

/// Linear-interpolation quantile of unsorted data; q in [0, 1].
double quantile(std::vector<double> values, double q);

/// Median wall time in seconds of `runs` calls.
double median_seconds(const std::function<void()>& fn, int runs = 5);

/// One method evaluated on one dataset.
struct MethodMetrics {
    std::string method;
    std::string dataset;
    Index rows = 0;
    Index kkt_pass = 0;  // rows whose report is below BenchOptions::kkt_tol
    KktReport kkt;       // mean over rows
    /// Quantiles (0, .25, .5, .75, 1) of oracle objective minus method objective.
    std::array<double, 5> gap{};
    double abs_gap_median = 0.0;
    double seconds = 0.0;  // whole dataset, median of BenchOptions::timing_runs
};

struct BenchReport {
    std::string case_name;
    std::string fingerprint;
    /// Rows per dataset the oracle found infeasible; excluded everywhere.
    std::map<std::string, Index> infeasible;
    std::vector<MethodMetrics> rows;

    const MethodMetrics& find(const std::string& method, const std::string& dataset) const;
};

struct BenchOptions {
    int timing_runs = 5;
    double kkt_tol = 1e-8;
    bool time_oracle = true;
};

/// Runs the oracle, the PSNN and (when given) the baseline on every dataset.
/// Throws FingerprintMismatch when a model was built for another problem.
BenchReport benchmark(const QpProblem& problem, const std::string& case_name, const PsnnModel& psnn,
                      const DnnModel* dnn, const std::map<std::string, MatrixXd>& datasets,
                      const BenchOptions& opts = {});

json bench_to_json(const BenchReport& r);
std::string bench_to_table(const BenchReport& r);
std::string bench_to_csv(const BenchReport& r);

struct SimConfig {
    Index samples_per_hour = 500;
    std::vector<double> scalers;  // one per hour
    std::string scaler_source;    // reported in metadata
    double rate = 1.25;
    /// Read the exponential parameter as the mean instead of the rate.
    bool mean_reading = false;
    double cap = 1.5;
    /// Bus ids receiving renewable injection; each must be a load bus.
    /// Empty selects the load bus with the largest base demand.
    std::vector<int> renewable_buses;
    std::uint64_t seed = 0;
    double kkt_tol = 1e-8;
};

/// Reads a two-column CSV (hour, scaler); '#' lines are comments.
std::vector<double> read_scalers(const std::string& text);
/// The shipped 24-hour stand-in profile.
std::vector<double> default_scalers();

struct SimResult {
    std::vector<int> renewable_buses;
    std::vector<Index> hour;   // per row
    MatrixXd thetas;           // rows x load buses, net demand
    MatrixXd renewables;       // rows x renewable buses
    BatchSolution solution;
    std::vector<bool> kkt_pass;
    double predict_seconds = 0.0;
    json meta;

    Index rows() const { return thetas.rows(); }
    Index failures() const;
};

/// Hourly scaled base demand minus truncated exponential renewable draws,
/// all hours predicted in one batch.
SimResult simulate_uncertainty(const PsnnModel& model, const GridCase& grid, const SimConfig& cfg);

/// hour, generator, bus, passing rows, then min/q25/median/q75/max dispatch.
std::string dispatch_quantiles_csv(const SimResult& r, const GridCase& grid);
/// hour, constraint, generator, side, binding fraction, mean and max μ.
std::string dual_summary_csv(const SimResult& r, const GridCase& grid);

/// Oracle sweep of one varying coordinate: theta, status, mu_0.. per row.
/// Other coordinates sit at theta0. An empty range gives just the header.
std::string sweep_report(const QpProblem& problem, const VectorXd& theta0, Index axis, double lo, double hi,
                         double step);

}  // namespace mpqp
