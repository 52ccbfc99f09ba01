#pragma once

#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mpqp {

/// One stretch of the sweep over which a single active set stays optimal.
/// `lo` and `hi` are varying-parameter vectors that differ only on `axis`.
struct CriticalRegion {
    ActiveSet active_set;
    MatrixXd slopes;
    VectorXd intercept;
    VectorXd lo;
    VectorXd hi;
    Index axis = 0;
};

struct SweepInfo {
    VectorXd theta0;  // varying values held fixed off the swept axis
    Index axis = 0;
    double alpha = 0.01;
    double theta_plus = 0.0;
    double tol = 1e-8;
    bool refined = false;
    /// First sweep value at which the problem had no solution, if any.
    std::optional<double> infeasible_from;
};

struct RegionAtlas {
    QpProblem problem;
    std::string fingerprint;
    SweepInfo sweep;
    std::vector<CriticalRegion> regions;

    /// Distinct active sets in order of first appearance.
    std::vector<ActiveSet> distinct_active_sets() const;
    /// Index of the first region using each distinct set, same order.
    std::vector<std::size_t> distinct_region_index() const;
    Index num_varying() const { return problem.num_varying(); }
};

json atlas_to_json(const RegionAtlas& atlas);
/// Rejects documents whose embedded problem does not hash to the stored fingerprint.
RegionAtlas atlas_from_json(const json& j);

struct DiscoverOptions {
    double alpha = 0.01;
    double tol = 1e-8;
    /// Bisect each switch to localize the breakpoint below α resolution.
    bool refine = false;
    int refine_steps = 20;
};

/**
 * Sweeps varying coordinate `axis` over [0, theta_plus] in steps of α with
 * all other varying coordinates at theta0. The current active set is
 * reused while its region solution passes the KKT check at `tol`; a
 * failure triggers an oracle solve and opens a new region. An infeasible
 * point ends the sweep and is recorded in `sweep.infeasible_from`.
 *
 * Throws InfeasibleStart when the first sweep point has no solution.
 */
RegionAtlas discover(const QpProblem& problem, const VectorXd& theta0, Index axis, double theta_plus,
                     const DiscoverOptions& opts = {});

struct LabeledDataset {
    MatrixXd inputs;   // N x n_varying
    MatrixXd targets;  // N x (target width)
    std::vector<Index> region_id;  // -1 when unknown

    Index rows() const { return inputs.rows(); }
};

/// CSV with columns theta_0.., then the target columns, then region_id.
std::string dataset_to_csv(const LabeledDataset& d, const std::vector<std::string>& target_names);
std::string dataset_to_csv(const LabeledDataset& d, const std::string& target_prefix = "mu");
/// Targets are every column other than theta_* and region_id, in file order.
LabeledDataset dataset_from_csv(const std::string& text, std::vector<std::string>* target_names = nullptr);

/**
 * Solver-free labelling: for each region, draws `per_region` points on
 * the swept axis uniformly in [lo, hi], sets μ from the region's affine
 * map and keeps the row once the reconstructed solution passes the KKT
 * check at `tol`. Up to 100 resamples per row, then RegionExhausted.
 */
LabeledDataset populate(const RegionAtlas& atlas, Index per_region, std::uint64_t seed, double tol = 1e-9);

struct ExtendResult {
    LabeledDataset data;
    Index attempted = 0;
    Index dropped = 0;
    std::vector<std::string> warnings;
};

/**
 * Reuses the atlas regions along a different varying coordinate: the
 * swept axis is held at theta0 and `axis2` is drawn from each region's
 * interval. Rows that fail KKT are resampled; persistent failures are
 * dropped and counted instead of raising.
 */
ExtendResult second_axis_extend(const RegionAtlas& atlas, Index axis2, Index per_region, std::uint64_t seed,
                                double tol = 1e-9);

}  // namespace mpqp
