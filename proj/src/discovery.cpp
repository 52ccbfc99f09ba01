#include "mpqp/discovery.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/qp_core.hpp"
#include "mpqp/rng.hpp"

#include <cmath>
#include <map>

namespace mpqp {

std::vector<ActiveSet> RegionAtlas::distinct_active_sets() const {
    std::vector<ActiveSet> out;
    for (std::size_t i : distinct_region_index()) out.push_back(regions[i].active_set);
    return out;
}

std::vector<std::size_t> RegionAtlas::distinct_region_index() const {
    std::vector<std::size_t> out;
    std::map<std::string, bool> seen;
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (seen.emplace(regions[i].active_set.key(), true).second) out.push_back(i);
    return out;
}

json atlas_to_json(const RegionAtlas& atlas) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "mpqp.atlas";
    j["fingerprint"] = atlas.fingerprint;
    j["problem"] = problem_to_json(atlas.problem);
    const SweepInfo& s = atlas.sweep;
    j["sweep"] = {{"theta0", vector_to_json(s.theta0)},
                  {"axis", s.axis},
                  {"alpha", s.alpha},
                  {"theta_plus", s.theta_plus},
                  {"tol", s.tol},
                  {"refined", s.refined},
                  {"infeasible_from", s.infeasible_from ? json(*s.infeasible_from) : json(nullptr)}};
    j["regions"] = json::array();
    for (const auto& r : atlas.regions)
        j["regions"].push_back({{"active_set", r.active_set.indices()},
                                {"slopes", matrix_to_json(r.slopes)},
                                {"intercept", vector_to_json(r.intercept)},
                                {"lo", vector_to_json(r.lo)},
                                {"hi", vector_to_json(r.hi)},
                                {"axis", r.axis}});
    return j;
}

RegionAtlas atlas_from_json(const json& j) {
    RegionAtlas a;
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion) throw ParseError("atlas: unsupported schema_version");
        a.problem = problem_from_json(j.at("problem"));
        a.fingerprint = j.at("fingerprint").get<std::string>();
        if (a.fingerprint != fingerprint(a.problem))
            throw FingerprintMismatch("atlas: embedded problem does not match its fingerprint");
        const json& s = j.at("sweep");
        a.sweep.theta0 = vector_from_json(s.at("theta0"), "sweep.theta0");
        a.sweep.axis = s.at("axis").get<Index>();
        a.sweep.alpha = s.at("alpha").get<double>();
        a.sweep.theta_plus = s.at("theta_plus").get<double>();
        a.sweep.tol = s.at("tol").get<double>();
        a.sweep.refined = s.at("refined").get<bool>();
        if (!s.at("infeasible_from").is_null()) a.sweep.infeasible_from = s["infeasible_from"].get<double>();
        for (const auto& r : j.at("regions")) {
            CriticalRegion cr;
            cr.active_set = ActiveSet(r.at("active_set").get<std::vector<Index>>());
            cr.active_set.check(a.problem.m2());
            cr.slopes = matrix_from_json(r.at("slopes"), "region.slopes");
            cr.intercept = vector_from_json(r.at("intercept"), "region.intercept");
            cr.lo = vector_from_json(r.at("lo"), "region.lo");
            cr.hi = vector_from_json(r.at("hi"), "region.hi");
            cr.axis = r.at("axis").get<Index>();
            const Index nb = static_cast<Index>(cr.active_set.size()), nv = a.problem.num_varying();
            if (cr.slopes.rows() != nb || (nb > 0 && cr.slopes.cols() != nv) || cr.intercept.size() != nb ||
                cr.lo.size() != nv || cr.hi.size() != nv || cr.axis < 0 || cr.axis >= nv)
                throw ParseError("atlas: region " + cr.active_set.key() + " has inconsistent dimensions");
            a.regions.push_back(std::move(cr));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("atlas: ") + e.what());
    }
    return a;
}

namespace {

bool region_passes(const QpProblem& problem, const RegionFactor& f, const VectorXd& v, double tol) {
    const ParamPoint pt = ParamPoint::from_varying(problem, v);
    try {
        return is_optimal(kkt_report(problem, pt, f.solve(pt)), tol);
    } catch (const SingularKkt&) {
        return false;
    }
}

// μ over all m2 constraints from a region's affine map.
VectorXd region_mu(const QpProblem& problem, const ActiveSet& set, const MatrixXd& slopes, const VectorXd& intercept,
                   const VectorXd& v) {
    VectorXd mu = VectorXd::Zero(problem.m2());
    if (set.empty()) return mu;
    const VectorXd mb = slopes * v + intercept;
    Index k = 0;
    for (Index j : set) mu[j] = mb[k++];
    return mu;
}

bool mu_passes(const QpProblem& problem, const EqualityFactor& eq, const VectorXd& mu, const VectorXd& v, double tol) {
    const ParamPoint pt = ParamPoint::from_varying(problem, v);
    const EqualitySolution g = eq.solve(pt, &mu);
    return is_optimal(kkt_report(problem, pt, FullSolution{g.x, g.lambda, mu}), tol);
}

}  // namespace

RegionAtlas discover(const QpProblem& problem, const VectorXd& theta0, Index axis, double theta_plus,
                     const DiscoverOptions& opts) {
    problem.validate();
    const Index nv = problem.num_varying();
    if (!(opts.alpha > 0.0) || !std::isfinite(opts.alpha)) throw ValidationError("discover: alpha must be positive");
    if (!(opts.tol > 0.0)) throw ValidationError("discover: tol must be positive");
    if (!(theta_plus >= 0.0) || !std::isfinite(theta_plus))
        throw ValidationError("discover: theta_plus must be finite and non-negative");
    if (theta0.size() != nv) throw ValidationError("discover: theta0 must have one entry per varying parameter");
    if (axis < 0 || axis >= nv) throw ValidationError("discover: axis out of range");

    RegionAtlas atlas;
    atlas.problem = problem;
    atlas.fingerprint = fingerprint(problem);
    atlas.sweep = {theta0, axis, opts.alpha, theta_plus, opts.tol, opts.refine, std::nullopt};

    auto point_at = [&](double t) {
        VectorXd v = theta0;
        v[axis] = t;
        return v;
    };

    const Index steps = static_cast<Index>(std::ceil(theta_plus / opts.alpha - 1e-9));
    std::optional<RegionFactor> current;
    double last_ok = 0.0;
    for (Index i = 0; i <= steps; ++i) {
        const double t = std::min(static_cast<double>(i) * opts.alpha, theta_plus);
        const VectorXd v = point_at(t);
        if (current && region_passes(problem, *current, v, opts.tol)) {
            atlas.regions.back().hi = v;
            last_ok = t;
            continue;
        }

        OracleResult r;
        try {
            r = solve_auto(problem, ParamPoint::from_varying(problem, v));
        } catch (const Infeasible&) {
            if (i == 0) throw InfeasibleStart("discover: no solution at the sweep start");
            atlas.sweep.infeasible_from = t;
            break;
        }
        if (current && r.active_set == current->active()) {
            // Roundoff at the tolerance edge; the oracle confirms the region.
            atlas.regions.back().hi = v;
            last_ok = t;
            continue;
        }

        RegionFactor next(problem, r.active_set);
        VectorXd lo = v;
        if (current && opts.refine) {
            double a = last_ok, b = t;
            for (int k = 0; k < opts.refine_steps; ++k) {
                const double m = 0.5 * (a + b);
                (region_passes(problem, *current, point_at(m), opts.tol) ? a : b) = m;
            }
            atlas.regions.back().hi = point_at(a);
            if (region_passes(problem, next, point_at(b), opts.tol)) lo = point_at(b);
        }
        const SlopeMatrix sm = next.slopes();
        atlas.regions.push_back({r.active_set, sm.slopes, sm.intercept, lo, v, axis});
        current.emplace(problem, r.active_set);
        last_ok = t;
    }
    return atlas;
}

std::string dataset_to_csv(const LabeledDataset& d, const std::vector<std::string>& target_names) {
    if (static_cast<Index>(target_names.size()) != d.targets.cols())
        throw ValidationError("dataset: target name count does not match target columns");
    if (d.targets.rows() != d.rows() || static_cast<Index>(d.region_id.size()) != d.rows())
        throw ValidationError("dataset: inputs, targets and region ids differ in length");
    CsvTable t;
    for (Index k = 0; k < d.inputs.cols(); ++k) t.header.push_back("theta_" + std::to_string(k));
    t.header.insert(t.header.end(), target_names.begin(), target_names.end());
    t.header.push_back("region_id");
    for (Index r = 0; r < d.rows(); ++r) {
        std::vector<std::string> row;
        for (Index k = 0; k < d.inputs.cols(); ++k) row.push_back(format_double(d.inputs(r, k)));
        for (Index k = 0; k < d.targets.cols(); ++k) row.push_back(format_double(d.targets(r, k)));
        row.push_back(std::to_string(d.region_id[static_cast<std::size_t>(r)]));
        t.rows.push_back(std::move(row));
    }
    return write_csv(t);
}

std::string dataset_to_csv(const LabeledDataset& d, const std::string& target_prefix) {
    std::vector<std::string> names;
    for (Index k = 0; k < d.targets.cols(); ++k) names.push_back(target_prefix + "_" + std::to_string(k));
    return dataset_to_csv(d, names);
}

LabeledDataset dataset_from_csv(const std::string& text, std::vector<std::string>* target_names) {
    const CsvTable t = parse_csv(text);
    const auto theta_cols = t.columns_with_prefix("theta_");
    const Index region_col = t.column("region_id");
    std::vector<Index> target_cols;
    std::vector<std::string> names;
    for (Index c = 0; c < static_cast<Index>(t.header.size()); ++c) {
        const std::string& h = t.header[static_cast<std::size_t>(c)];
        if (c == region_col || h.rfind("theta_", 0) == 0) continue;
        target_cols.push_back(c);
        names.push_back(h);
    }
    if (theta_cols.empty()) throw ParseError("dataset: no theta_* columns");

    LabeledDataset d;
    const Index n = static_cast<Index>(t.rows.size());
    d.inputs.resize(n, static_cast<Index>(theta_cols.size()));
    d.targets.resize(n, static_cast<Index>(target_cols.size()));
    d.region_id.assign(static_cast<std::size_t>(n), -1);
    for (Index r = 0; r < n; ++r) {
        const auto& row = t.rows[static_cast<std::size_t>(r)];
        const std::string where = "dataset row " + std::to_string(r + 1);
        for (std::size_t k = 0; k < theta_cols.size(); ++k)
            d.inputs(r, static_cast<Index>(k)) = parse_double(row[static_cast<std::size_t>(theta_cols[k])], where);
        for (std::size_t k = 0; k < target_cols.size(); ++k)
            d.targets(r, static_cast<Index>(k)) = parse_double(row[static_cast<std::size_t>(target_cols[k])], where);
        if (region_col >= 0)
            d.region_id[static_cast<std::size_t>(r)] =
                static_cast<Index>(parse_double(row[static_cast<std::size_t>(region_col)], where));
    }
    if (target_names) *target_names = names;
    return d;
}

LabeledDataset populate(const RegionAtlas& atlas, Index per_region, std::uint64_t seed, double tol) {
    if (atlas.regions.empty()) throw ValidationError("populate: atlas has no regions");
    if (per_region < 1) throw ValidationError("populate: per_region must be at least 1");
    constexpr int kMaxResamples = 100;

    const QpProblem& problem = atlas.problem;
    const EqualityFactor eq(problem);
    const Index nv = problem.num_varying(), total = per_region * static_cast<Index>(atlas.regions.size());
    LabeledDataset d{MatrixXd(total, nv), MatrixXd(total, problem.m2()), {}};
    d.region_id.reserve(static_cast<std::size_t>(total));

    const Rng root(seed);
    Index row = 0;
    for (std::size_t ri = 0; ri < atlas.regions.size(); ++ri) {
        const CriticalRegion& cr = atlas.regions[ri];
        Rng rng = root.split(ri);
        for (Index k = 0; k < per_region; ++k) {
            for (int attempt = 0;; ++attempt) {
                if (attempt == kMaxResamples)
                    throw RegionExhausted("populate: region " + std::to_string(ri) + " " + cr.active_set.key() +
                                          " failed the KKT check on " + std::to_string(kMaxResamples) + " samples");
                VectorXd v = cr.lo;
                v[cr.axis] = rng.uniform(cr.lo[cr.axis], cr.hi[cr.axis]);
                const VectorXd mu = region_mu(problem, cr.active_set, cr.slopes, cr.intercept, v);
                if (!mu_passes(problem, eq, mu, v, tol)) continue;
                d.inputs.row(row) = v.transpose();
                d.targets.row(row) = mu.transpose();
                d.region_id.push_back(static_cast<Index>(ri));
                ++row;
                break;
            }
        }
    }
    return d;
}

ExtendResult second_axis_extend(const RegionAtlas& atlas, Index axis2, Index per_region, std::uint64_t seed,
                                double tol) {
    constexpr int kMaxResamples = 100;
    const QpProblem& problem = atlas.problem;
    const Index nv = problem.num_varying(), axis = atlas.sweep.axis;
    ExtendResult out;
    out.data.inputs.resize(0, nv);
    out.data.targets.resize(0, problem.m2());
    if (axis2 < 0 || axis2 >= nv || axis2 == axis) {
        out.warnings.push_back("second_axis_extend: axis " + std::to_string(axis2) +
                               " is not a distinct varying coordinate; nothing sampled");
        return out;
    }

    const EqualityFactor eq(problem);
    std::vector<VectorXd> inputs, targets;
    const Rng root(seed);
    for (std::size_t ri = 0; ri < atlas.regions.size(); ++ri) {
        const CriticalRegion& cr = atlas.regions[ri];
        Rng rng = root.split(ri);
        Index region_drops = 0;
        for (Index k = 0; k < per_region; ++k) {
            bool kept = false;
            for (int attempt = 0; attempt < kMaxResamples && !kept; ++attempt) {
                ++out.attempted;
                VectorXd v = atlas.sweep.theta0;
                v[axis2] = rng.uniform(cr.lo[axis], cr.hi[axis]);
                const VectorXd mu = region_mu(problem, cr.active_set, cr.slopes, cr.intercept, v);
                if (!mu_passes(problem, eq, mu, v, tol)) continue;
                inputs.push_back(v);
                targets.push_back(mu);
                out.data.region_id.push_back(static_cast<Index>(ri));
                kept = true;
            }
            if (!kept) ++region_drops;
        }
        if (region_drops > 0)
            out.warnings.push_back("second_axis_extend: region " + std::to_string(ri) + " " + cr.active_set.key() +
                                   " dropped " + std::to_string(region_drops) + " rows");
        out.dropped += region_drops;
    }
    out.data.inputs.resize(static_cast<Index>(inputs.size()), nv);
    out.data.targets.resize(static_cast<Index>(targets.size()), problem.m2());
    for (std::size_t r = 0; r < inputs.size(); ++r) {
        out.data.inputs.row(static_cast<Index>(r)) = inputs[r].transpose();
        out.data.targets.row(static_cast<Index>(r)) = targets[r].transpose();
    }
    return out;
}

}  // namespace mpqp
