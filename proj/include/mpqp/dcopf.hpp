#pragma once

#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mpqp {

// All power quantities are per-unit on `base_mva`; costs are per hour with
// the per-unit power as argument.

struct Bus {
    int id = 0;
    double demand = 0.0;
};

struct Branch {
    int from = 0;
    int to = 0;
    double susceptance = 0.0;  // 1 / reactance
};

struct Generator {
    int bus = 0;
    double cost_quadratic = 0.0;
    double cost_linear = 0.0;
    double cost_constant = 0.0;
    double p_min = 0.0;
    double p_max = 0.0;
};

struct GridCase {
    std::string name;
    double base_mva = 100.0;
    int reference_bus = 0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    Index num_buses() const { return static_cast<Index>(buses.size()); }
    Index num_generators() const { return static_cast<Index>(generators.size()); }

    /// Position of bus `id` in `buses`; throws ValidationError when absent.
    Index bus_index(int id) const;
    /// Positions of buses with positive base demand, in bus order.
    std::vector<Index> load_buses() const;
    /// Base demand at the load buses.
    VectorXd base_load() const;
    double total_capacity() const;

    /// Throws ValidationError naming the violated invariant.
    void validate() const;
};

bool operator==(const Bus& a, const Bus& b);
bool operator==(const Branch& a, const Branch& b);
bool operator==(const Generator& a, const Generator& b);
bool operator==(const GridCase& a, const GridCase& b);

json case_to_json(const GridCase& c);
GridCase case_from_json(const json& j);

/// Reads the bus/gen/branch/gencost tables of a tabular grid-case file.
/// Powers are divided by baseMVA; costs are multiplied by `cost_scale`
/// after conversion to per-unit arguments.
GridCase parse_matpower(const std::string& text, double cost_scale = 1.0, const std::string& name = "");

/// JSON case documents start with '{'; anything else is read as a tabular
/// grid case. The result is validated.
GridCase parse_case(const std::string& text, double cost_scale = 1.0);

/// Two buses, one generator at the reference bus, one load, one branch.
GridCase toy_case();

/// Directory holding the shipped cases and profiles. MPQP_DATA_DIR in the
/// environment overrides the compiled-in location.
std::filesystem::path data_dir();

/// "toy2" or a shipped case name ("case6", "case30", "case57"), else a path.
GridCase load_case(const std::string& name_or_path);

/// Nodal susceptance Laplacian (n_b x n_b).
MatrixXd susceptance_matrix(const GridCase& c);

/**
 * DC-OPF as a parametric QP with x = [P_g; δ]:
 *
 *   min  Σ q_g P_g² + c_g P_g + k_g
 *   s.t. M_g P_g + B δ = θ_e          (one row per bus, θ_e = nodal demand)
 *        δ_ref = 0
 *        P_g <= P_max,  -P_g <= -P_min  (uppers first, then lowers)
 *
 * The load-bus balance rows are the varying parameters, so a varying
 * vector is the demand at `load_buses()` in order.
 */
QpProblem build_qp(const GridCase& c);

/// Every row scales the base load by one shared Uniform(0.6, 1.4) draw.
MatrixXd make_realistic_dataset(const GridCase& c, Index n, std::uint64_t seed);

/// All load buses at 0.01 except one drawn from Uniform(0, Σ P_max),
/// cycling through the load buses with ⌈n / n_loads⌉ draws each.
MatrixXd make_extreme_dataset(const GridCase& c, Index n, std::uint64_t seed);

}  // namespace mpqp
