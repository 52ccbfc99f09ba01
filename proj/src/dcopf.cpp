#include "mpqp/dcopf.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace mpqp {

Index GridCase::bus_index(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<Index>(i);
    throw ValidationError("case " + name + ": unknown bus " + std::to_string(id));
}

std::vector<Index> GridCase::load_buses() const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < buses.size(); ++i)
        if (buses[i].demand > 0.0) out.push_back(static_cast<Index>(i));
    return out;
}

VectorXd GridCase::base_load() const {
    const auto loads = load_buses();
    VectorXd d(static_cast<Index>(loads.size()));
    for (std::size_t k = 0; k < loads.size(); ++k)
        d[static_cast<Index>(k)] = buses[static_cast<std::size_t>(loads[k])].demand;
    return d;
}

double GridCase::total_capacity() const {
    double s = 0.0;
    for (const auto& g : generators) s += g.p_max;
    return s;
}

void GridCase::validate() const {
    const std::string where = "case " + (name.empty() ? std::string("<unnamed>") : name) + ": ";
    if (buses.empty()) throw ValidationError(where + "no buses");
    if (generators.empty()) throw ValidationError(where + "no generators");
    if (!(base_mva > 0.0)) throw ValidationError(where + "base_mva must be positive");

    std::set<int> ids;
    for (const auto& b : buses) {
        if (!ids.insert(b.id).second) throw ValidationError(where + "duplicate bus id " + std::to_string(b.id));
        if (!std::isfinite(b.demand)) throw ValidationError(where + "non-finite demand at bus " + std::to_string(b.id));
    }
    if (!ids.count(reference_bus))
        throw ValidationError(where + "reference bus " + std::to_string(reference_bus) + " does not exist");

    for (std::size_t g = 0; g < generators.size(); ++g) {
        const auto& gen = generators[g];
        const std::string tag = where + "generator " + std::to_string(g) + ": ";
        if (!ids.count(gen.bus)) throw ValidationError(tag + "bus " + std::to_string(gen.bus) + " does not exist");
        if (!std::isfinite(gen.cost_quadratic) || !std::isfinite(gen.cost_linear) || !std::isfinite(gen.cost_constant))
            throw ValidationError(tag + "non-finite cost");
        if (!(gen.cost_quadratic > 0.0)) throw ValidationError(tag + "quadratic cost must be positive");
        if (!std::isfinite(gen.p_min) || !std::isfinite(gen.p_max) || gen.p_min > gen.p_max)
            throw ValidationError(tag + "requires finite p_min <= p_max");
    }

    // Union-find over branches for connectivity.
    std::vector<std::size_t> parent(buses.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& br = branches[k];
        const std::string tag = where + "branch " + std::to_string(k) + ": ";
        if (!ids.count(br.from) || !ids.count(br.to)) throw ValidationError(tag + "endpoint does not exist");
        if (br.from == br.to) throw ValidationError(tag + "self loop");
        if (!std::isfinite(br.susceptance) || br.susceptance <= 0.0)
            throw ValidationError(tag + "susceptance must be positive and finite");
        parent[find(static_cast<std::size_t>(bus_index(br.from)))] = find(static_cast<std::size_t>(bus_index(br.to)));
    }
    for (std::size_t i = 1; i < buses.size(); ++i)
        if (find(i) != find(0)) throw ValidationError(where + "network is disconnected");
}

bool operator==(const Bus& a, const Bus& b) { return a.id == b.id && a.demand == b.demand; }
bool operator==(const Branch& a, const Branch& b) {
    return a.from == b.from && a.to == b.to && a.susceptance == b.susceptance;
}
bool operator==(const Generator& a, const Generator& b) {
    return a.bus == b.bus && a.cost_quadratic == b.cost_quadratic && a.cost_linear == b.cost_linear &&
           a.cost_constant == b.cost_constant && a.p_min == b.p_min && a.p_max == b.p_max;
}
bool operator==(const GridCase& a, const GridCase& b) {
    return a.name == b.name && a.base_mva == b.base_mva && a.reference_bus == b.reference_bus &&
           a.buses == b.buses && a.branches == b.branches && a.generators == b.generators;
}

json case_to_json(const GridCase& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "mpqp.grid_case";
    j["name"] = c.name;
    j["base_mva"] = c.base_mva;
    j["reference_bus"] = c.reference_bus;
    j["buses"] = json::array();
    for (const auto& b : c.buses) j["buses"].push_back({{"id", b.id}, {"demand", b.demand}});
    j["branches"] = json::array();
    for (const auto& br : c.branches)
        j["branches"].push_back({{"from", br.from}, {"to", br.to}, {"susceptance", br.susceptance}});
    j["generators"] = json::array();
    for (const auto& g : c.generators)
        j["generators"].push_back({{"bus", g.bus},
                                   {"cost_quadratic", g.cost_quadratic},
                                   {"cost_linear", g.cost_linear},
                                   {"cost_constant", g.cost_constant},
                                   {"p_min", g.p_min},
                                   {"p_max", g.p_max}});
    return j;
}

GridCase case_from_json(const json& j) {
    GridCase c;
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw ParseError("case: unsupported schema_version");
        c.name = j.value("name", std::string());
        c.base_mva = j.value("base_mva", 100.0);
        c.reference_bus = j.at("reference_bus").get<int>();
        for (const auto& b : j.at("buses")) c.buses.push_back({b.at("id").get<int>(), b.at("demand").get<double>()});
        for (const auto& br : j.at("branches"))
            c.branches.push_back(
                {br.at("from").get<int>(), br.at("to").get<int>(), br.at("susceptance").get<double>()});
        for (const auto& g : j.at("generators"))
            c.generators.push_back({g.at("bus").get<int>(), g.at("cost_quadratic").get<double>(),
                                    g.at("cost_linear").get<double>(), g.value("cost_constant", 0.0),
                                    g.at("p_min").get<double>(), g.at("p_max").get<double>()});
    } catch (const json::exception& e) {
        throw ParseError(std::string("case: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

struct TableRow {
    std::size_t line;
    std::vector<double> values;
};

using Tables = std::map<std::string, std::vector<TableRow>>;

// Pulls `mpc.<name> = [ ... ];` blocks and scalar `mpc.<name> = value;`
// assignments out of a tabular case file. '%' starts a comment.
void scan_matpower(const std::string& text, Tables& tables, std::map<std::string, double>& scalars) {
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    std::string open;  // table currently being read
    std::vector<double> pending;
    std::size_t pending_line = 0;

    auto flush = [&]() {
        if (!pending.empty()) tables[open].push_back({pending_line, pending});
        pending.clear();
    };
    auto read_numbers = [&](const std::string& chunk) {
        std::istringstream cs(chunk);
        std::string tok;
        while (cs >> tok) {
            if (pending.empty()) pending_line = lineno;
            pending.push_back(parse_double(tok, "line " + std::to_string(lineno)));
        }
    };

    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw.substr(0, raw.find('%'));
        if (open.empty()) {
            const auto pos = line.find("mpc.");
            const auto eq = line.find('=');
            if (pos == std::string::npos || eq == std::string::npos) continue;
            std::string key = line.substr(pos + 4, eq - pos - 4);
            key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
            std::string rhs = line.substr(eq + 1);
            const auto bracket = rhs.find('[');
            if (bracket == std::string::npos) {
                rhs.erase(std::remove_if(rhs.begin(), rhs.end(), [](char ch) { return ch == ';' || ::isspace(ch); }),
                          rhs.end());
                if (!rhs.empty() && rhs.front() != '\'')
                    scalars[key] = parse_double(rhs, "line " + std::to_string(lineno) + " (" + key + ")");
                continue;
            }
            open = key;
            tables[open];
            line = rhs.substr(bracket + 1);
        }
        // Inside a table: ';' and line ends terminate rows, ']' the table.
        const auto close = line.find(']');
        const std::string body = close == std::string::npos ? line : line.substr(0, close);
        std::size_t start = 0;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            if (i == body.size() || body[i] == ';') {
                read_numbers(body.substr(start, i - start));
                if (i < body.size()) flush();
                start = i + 1;
            }
        }
        flush();
        if (close != std::string::npos) open.clear();
    }
    if (!open.empty()) throw ParseError("unterminated table mpc." + open);
}

const std::vector<TableRow>& require_table(const Tables& t, const std::string& name, std::size_t min_cols) {
    const auto it = t.find(name);
    if (it == t.end() || it->second.empty()) throw ParseError("missing table mpc." + name);
    for (const auto& row : it->second)
        if (row.values.size() < min_cols)
            throw ParseError("line " + std::to_string(row.line) + ": mpc." + name + " row needs at least " +
                             std::to_string(min_cols) + " columns");
    return it->second;
}

int as_int(double v, const TableRow& row, const char* field) {
    if (v != std::floor(v)) throw ParseError("line " + std::to_string(row.line) + ": " + field + " must be an integer");
    return static_cast<int>(v);
}

}  // namespace

GridCase parse_matpower(const std::string& text, double cost_scale, const std::string& name) {
    Tables tables;
    std::map<std::string, double> scalars;
    scan_matpower(text, tables, scalars);

    GridCase c;
    c.name = name;
    c.base_mva = scalars.count("baseMVA") ? scalars["baseMVA"] : 100.0;
    const double base = c.base_mva;

    bool have_ref = false;
    for (const auto& row : require_table(tables, "bus", 3)) {
        const int id = as_int(row.values[0], row, "bus_i");
        const int type = as_int(row.values[1], row, "type");
        if (type == 4) continue;  // isolated
        c.buses.push_back({id, row.values[2] / base});
        if (type == 3) {
            if (have_ref) throw ParseError("line " + std::to_string(row.line) + ": multiple reference buses");
            c.reference_bus = id;
            have_ref = true;
        }
    }
    if (!have_ref) throw ParseError("no reference bus (type 3) in mpc.bus");

    for (const auto& row : require_table(tables, "branch", 4)) {
        if (row.values.size() > 10 && row.values[10] == 0.0) continue;  // out of service
        const double x = row.values[3];
        if (x == 0.0) throw ParseError("line " + std::to_string(row.line) + ": zero branch reactance");
        c.branches.push_back({as_int(row.values[0], row, "fbus"), as_int(row.values[1], row, "tbus"), 1.0 / x});
    }

    const auto& gens = require_table(tables, "gen", 10);
    const auto& costs = require_table(tables, "gencost", 5);
    if (costs.size() < gens.size()) throw ParseError("mpc.gencost has fewer rows than mpc.gen");
    for (std::size_t g = 0; g < gens.size(); ++g) {
        const auto& row = gens[g];
        if (row.values[7] <= 0.0) continue;  // out of service
        const auto& cr = costs[g];
        if (cr.values[0] != 2.0) throw ParseError("line " + std::to_string(cr.line) + ": only polynomial costs supported");
        const int ncost = as_int(cr.values[3], cr, "ncost");
        if (ncost < 1 || ncost > 3 || cr.values.size() < static_cast<std::size_t>(4 + ncost))
            throw ParseError("line " + std::to_string(cr.line) + ": polynomial cost must have 1 to 3 coefficients");
        double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
        for (int k = 0; k < ncost; ++k) coef[3 - ncost + k] = cr.values[static_cast<std::size_t>(4 + k)];
        Generator gen;
        gen.bus = as_int(row.values[0], row, "bus");
        gen.cost_quadratic = coef[0] * base * base * cost_scale;
        gen.cost_linear = coef[1] * base * cost_scale;
        gen.cost_constant = coef[2] * cost_scale;
        gen.p_max = row.values[8] / base;
        gen.p_min = row.values[9] / base;
        c.generators.push_back(gen);
    }
    return c;
}

GridCase parse_case(const std::string& text, double cost_scale) {
    const auto first = text.find_first_not_of(" \t\r\n");
    GridCase c;
    if (first != std::string::npos && text[first] == '{') {
        try {
            c = case_from_json(json::parse(text));
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("case JSON: ") + e.what());
        }
    } else {
        c = parse_matpower(text, cost_scale);
    }
    c.validate();
    return c;
}

GridCase toy_case() {
    GridCase c;
    c.name = "toy2";
    c.reference_bus = 1;
    c.buses = {{1, 0.0}, {2, 0.5}};
    c.branches = {{1, 2, 10.0}};
    c.generators = {{1, 1.0, 1.0, 0.0, 0.0, 1.0}};
    return c;
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("MPQP_DATA_DIR"); env && *env) return env;
    return MPQP_DATA_DIR;
}

GridCase load_case(const std::string& name_or_path) {
    if (name_or_path == "toy2") return toy_case();
    std::filesystem::path path(name_or_path);
    if (!std::filesystem::exists(path)) {
        const auto shipped = data_dir() / "cases" / (name_or_path + ".json");
        if (!std::filesystem::exists(shipped))
            throw ValidationError("case not found: " + name_or_path + " (looked in " + shipped.parent_path().string() + ")");
        path = shipped;
    }
    GridCase c = parse_case(read_text(path));
    if (c.name.empty()) c.name = path.stem().string();
    return c;
}

MatrixXd susceptance_matrix(const GridCase& c) {
    const Index nb = c.num_buses();
    MatrixXd B = MatrixXd::Zero(nb, nb);
    for (const auto& br : c.branches) {
        const Index i = c.bus_index(br.from), k = c.bus_index(br.to);
        B(i, i) += br.susceptance;
        B(k, k) += br.susceptance;
        B(i, k) -= br.susceptance;
        B(k, i) -= br.susceptance;
    }
    return B;
}

QpProblem build_qp(const GridCase& c) {
    c.validate();
    const Index ng = c.num_generators(), nb = c.num_buses(), n = ng + nb;

    QpProblem p;
    p.Q = MatrixXd::Zero(n, n);
    p.C = VectorXd::Zero(n);
    p.C0 = 0.0;
    for (Index g = 0; g < ng; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        p.Q(g, g) = gen.cost_quadratic;
        p.C[g] = gen.cost_linear;
        p.C0 += gen.cost_constant;
    }

    p.Ae = MatrixXd::Zero(nb + 1, n);
    for (Index g = 0; g < ng; ++g) p.Ae(c.bus_index(c.generators[static_cast<std::size_t>(g)].bus), g) = 1.0;
    p.Ae.block(0, ng, nb, nb) = susceptance_matrix(c);
    p.Ae(nb, ng + c.bus_index(c.reference_bus)) = 1.0;
    p.be = VectorXd::Zero(nb + 1);

    p.Ac = MatrixXd::Zero(2 * ng, n);
    p.bc = VectorXd::Zero(2 * ng);
    for (Index g = 0; g < ng; ++g) {
        const auto& gen = c.generators[static_cast<std::size_t>(g)];
        p.Ac(g, g) = 1.0;
        p.bc[g] = gen.p_max;
        p.Ac(ng + g, g) = -1.0;
        p.bc[ng + g] = -gen.p_min;
    }

    p.varying.assign(static_cast<std::size_t>(p.num_params()), false);
    for (Index i : c.load_buses()) p.varying[static_cast<std::size_t>(n + i)] = true;
    p.primary_block = ng;
    p.validate();
    return p;
}

MatrixXd make_realistic_dataset(const GridCase& c, Index n, std::uint64_t seed) {
    const VectorXd base = c.base_load();
    MatrixXd out(n, base.size());
    Rng rng(seed);
    for (Index r = 0; r < n; ++r) out.row(r) = rng.uniform(0.6, 1.4) * base.transpose();
    return out;
}

MatrixXd make_extreme_dataset(const GridCase& c, Index n, std::uint64_t seed) {
    const Index loads = static_cast<Index>(c.load_buses().size());
    if (loads == 0) throw ValidationError("case " + c.name + " has no load buses");
    const double hi = c.total_capacity();
    const Index per_bus = (n + loads - 1) / loads;
    MatrixXd out = MatrixXd::Constant(n, loads, 0.01);
    Rng rng(seed);
    Index r = 0;
    for (Index j = 0; j < loads && r < n; ++j)
        for (Index t = 0; t < per_bus && r < n; ++t, ++r) out(r, j) = rng.uniform(0.0, hi);
    return out;
}

}  // namespace mpqp
