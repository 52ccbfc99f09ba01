#include <CLI11.hpp>

#include "mpqp/baseline.hpp"
#include "mpqp/bench.hpp"
#include "mpqp/dcopf.hpp"
#include "mpqp/discovery.hpp"
#include "mpqp/errors.hpp"
#include "mpqp/io.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/psnn.hpp"
#include "mpqp/rng.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <random>

using namespace mpqp;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    bool entropy = false;
    std::optional<double> tol;
    std::string out;
    std::string format;
};

Globals g;

std::uint64_t require_seed(const std::string& command) {
    if (g.seed) return *g.seed;
    if (!g.entropy) throw ValidationError(command + " is randomized: pass --seed <n> (or --entropy for a fresh seed)");
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "using entropy seed " << s << "\n";
    g.seed = s;
    return s;
}

void emit(const std::string& text) {
    if (g.out.empty())
        std::cout << text;
    else
        write_text(g.out, text);
}

void emit_json(const json& j) { emit(j.dump(1) + "\n"); }

std::string format_or(const std::string& fallback) { return g.format.empty() ? fallback : g.format; }

MatrixXd read_thetas(const std::string& path) { return dataset_from_csv(read_text(path)).inputs; }

json kkt_summary(const QpProblem& p, const MatrixXd& thetas, const BatchSolution& s, double tol) {
    std::vector<KktReport> reps;
    Index pass = 0;
    for (Index i = 0; i < thetas.rows(); ++i) {
        reps.push_back(kkt_report(p, ParamPoint::from_varying(p, VectorXd(thetas.row(i).transpose())), s.row(i)));
        if (is_optimal(reps.back(), tol)) ++pass;
    }
    return {{"rows", thetas.rows()}, {"kkt_tol", tol}, {"kkt_pass", pass}, {"mean", report_to_json(mean_report(reps))}};
}

std::string solutions_csv(const QpProblem& p, const MatrixXd& thetas, const BatchSolution& s) {
    CsvTable t;
    for (Index k = 0; k < thetas.cols(); ++k) t.header.push_back("theta_" + std::to_string(k));
    for (const auto& n : solution_target_names(p)) t.header.push_back(n);
    for (Index i = 0; i < thetas.rows(); ++i) {
        std::vector<std::string> row;
        for (Index k = 0; k < thetas.cols(); ++k) row.push_back(format_double(thetas(i, k)));
        for (Index k = 0; k < s.x.cols(); ++k) row.push_back(format_double(s.x(i, k)));
        for (Index k = 0; k < s.lambda.cols(); ++k) row.push_back(format_double(s.lambda(i, k)));
        for (Index k = 0; k < s.mu.cols(); ++k) row.push_back(format_double(s.mu(i, k)));
        t.rows.push_back(std::move(row));
    }
    return write_csv(t);
}

VectorXd theta_or_default(const std::vector<double>& given, Index n, double fill) {
    if (given.empty()) return VectorXd::Constant(n, fill);
    if (static_cast<Index>(given.size()) != n)
        throw ValidationError("expected " + std::to_string(n) + " varying values, got " + std::to_string(given.size()));
    return Eigen::Map<const VectorXd>(given.data(), n);
}

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Validation: return 2;
        case ErrorKind::Infeasible: return 3;
        case ErrorKind::Numeric: return 4;
    }
    return 4;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiparametric QP toolkit: region discovery, PSNN training and DC-OPF benchmarks"};
    app.require_subcommand(1);
    app.fallthrough();
    app.option_defaults()->always_capture_default();
    app.add_option("--seed", g.seed, "Seed for randomized commands");
    app.add_flag("--entropy", g.entropy, "Allow randomized commands to draw a fresh seed");
    app.add_option("--tol", g.tol, "KKT tolerance");
    app.add_option("--out", g.out, "Output file (stdout when omitted)");
    app.add_option("--format", g.format, "json | csv | table")->check(CLI::IsMember({"json", "csv", "table"}));

    // solve
    std::string case_name = "case6", method = "auto";
    std::vector<double> theta;
    auto* solve = app.add_subcommand("solve", "Solve one instance with the oracle");
    solve->add_option("--case", case_name, "Case name or file");
    solve->add_option("--theta", theta, "Varying parameter values (default: base load)")->delimiter(',');
    solve->add_option("--method", method)->check(CLI::IsMember({"auto", "enumerate", "active-set"}));

    // discover
    Index axis = 0;
    std::optional<double> theta_plus;
    DiscoverOptions dopt;
    auto* disc = app.add_subcommand("discover", "Sweep one axis and record critical regions");
    disc->add_option("--case", case_name);
    disc->add_option("--theta0", theta, "Values off the swept axis (default 0.01)")->delimiter(',');
    disc->add_option("--axis", axis);
    disc->add_option("--theta-plus", theta_plus, "Sweep end (default: total capacity)");
    disc->add_option("--alpha", dopt.alpha);
    disc->add_flag("--refine", dopt.refine, "Bisect each breakpoint");

    // gen-data
    std::string atlas_path, train_path, val_path, model_path, baseline_path, input_path, report_path;
    Index per_region = 200;
    std::optional<Index> axis2;
    auto* gen = app.add_subcommand("gen-data", "Label points inside the atlas regions without a solver");
    gen->add_option("--atlas", atlas_path)->required();
    gen->add_option("--per-region", per_region);
    gen->add_option("--second-axis", axis2, "Also sample along this varying coordinate");

    // make-dataset
    std::string kind = "realistic";
    Index rows = 1000;
    bool label = false;
    auto* mk = app.add_subcommand("make-dataset", "Draw realistic or extreme demand samples");
    mk->add_option("--case", case_name);
    mk->add_option("--kind", kind)->check(CLI::IsMember({"realistic", "extreme"}));
    mk->add_option("--rows", rows);
    mk->add_flag("--label", label, "Attach oracle solutions [x; lambda; mu]");

    // train
    TrainConfig tcfg;
    std::string init = "warm", optimizer = "adam";
    auto* tr = app.add_subcommand("train", "Train the PSNN shadow-price network");
    tr->add_option("--atlas", atlas_path)->required();
    tr->add_option("--train", train_path)->required();
    tr->add_option("--val", val_path);
    tr->add_option("--lr", tcfg.learning_rate);
    tr->add_option("--max-epochs", tcfg.max_epochs);
    tr->add_option("--batch-size", tcfg.batch_size);
    tr->add_option("--init", init)->check(CLI::IsMember({"warm", "analytic", "random"}));
    tr->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "gd"}));
    bool no_clamp = false;
    tr->add_flag("--no-clamp", no_clamp, "Store the model with mu clamping off");

    // train-baseline
    DnnTrainConfig bcfg;
    auto* trb = app.add_subcommand("train-baseline", "Train the dense baseline network");
    trb->add_option("--case", case_name);
    trb->add_option("--train", train_path)->required();
    trb->add_option("--val", val_path);
    trb->add_option("--lr", bcfg.learning_rate);
    trb->add_option("--max-epochs", bcfg.max_epochs);
    trb->add_option("--batch-size", bcfg.batch_size);
    trb->add_option("--patience", bcfg.patience);
    trb->add_option("--hidden", bcfg.hidden)->delimiter(',');

    // predict / predict-baseline
    auto* pr = app.add_subcommand("predict", "Predict full solutions with a PSNN model");
    auto* prb = app.add_subcommand("predict-baseline", "Predict full solutions with the baseline");
    for (auto* c : {pr, prb}) {
        c->add_option("--model", model_path)->required();
        c->add_option("--case", case_name);
        c->add_option("--input", input_path, "CSV with theta_* columns")->required();
        c->add_option("--report", report_path, "Write a KKT summary here");
    }
    pr->add_flag("--no-clamp", no_clamp);

    // benchmark
    std::string realistic_path, extreme_path;
    BenchOptions bopt;
    auto* bench = app.add_subcommand("benchmark", "Compare oracle, PSNN and baseline");
    bench->add_option("--case", case_name);
    bench->add_option("--model", model_path)->required();
    bench->add_option("--baseline", baseline_path);
    bench->add_option("--realistic", realistic_path, "CSV of theta rows (drawn when omitted)");
    bench->add_option("--extreme", extreme_path, "CSV of theta rows (drawn when omitted)");
    bench->add_option("--rows", rows, "Rows per drawn dataset");
    bench->add_option("--runs", bopt.timing_runs, "Timing repetitions");

    // simulate
    SimConfig scfg;
    std::string scalers_path;
    auto* sim = app.add_subcommand("simulate", "Hourly renewable-uncertainty Monte Carlo");
    sim->add_option("--case", case_name);
    sim->add_option("--model", model_path)->required();
    sim->add_option("--scalers", scalers_path, "Hourly scaler CSV (default: shipped stand-in profile)");
    sim->add_option("--samples", scfg.samples_per_hour);
    sim->add_option("--rate", scfg.rate);
    sim->add_flag("--mean-reading", scfg.mean_reading, "Treat --rate as the mean");
    sim->add_option("--cap", scfg.cap);
    sim->add_option("--renewable-bus", scfg.renewable_buses, "Bus ids (default: largest load bus)")->delimiter(',');

    // sweep
    double from = 0.0, to = 5.0, step = 0.1;
    auto* sw = app.add_subcommand("sweep", "Oracle shadow prices along one axis");
    sw->add_option("--case", case_name);
    sw->add_option("--axis", axis);
    sw->add_option("--theta0", theta)->delimiter(',');
    sw->add_option("--from", from);
    sw->add_option("--to", to);
    sw->add_option("--step", step);

    // convert-case
    double cost_scale = 0.01;
    std::string case_label;
    auto* conv = app.add_subcommand("convert-case", "Convert a tabular case file to JSON");
    conv->add_option("--input", input_path)->required();
    conv->add_option("--cost-scale", cost_scale);
    conv->add_option("--name", case_label, "Case name (default: file stem)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (solve->parsed()) {
            const GridCase c = load_case(case_name);
            const QpProblem p = build_qp(c);
            const VectorXd v = theta.empty() ? c.base_load() : theta_or_default(theta, p.num_varying(), 0.0);
            const ParamPoint pt = ParamPoint::from_varying(p, v);
            OracleOptions o;
            if (g.tol) o.kkt_tol = *g.tol;
            const OracleResult r = method == "enumerate"    ? solve_enumerate(p, pt, o)
                                   : method == "active-set" ? solve_active_set(p, pt, o)
                                                            : solve_auto(p, pt, o);
            emit_json(oracle_result_to_json(r, p, pt));
        } else if (disc->parsed()) {
            const GridCase c = load_case(case_name);
            const QpProblem p = build_qp(c);
            if (g.tol) dopt.tol = *g.tol;
            const RegionAtlas a = discover(p, theta_or_default(theta, p.num_varying(), 0.01), axis,
                                           theta_plus.value_or(c.total_capacity()), dopt);
            std::cerr << a.regions.size() << " regions, " << a.distinct_active_sets().size() << " distinct active sets\n";
            emit_json(atlas_to_json(a));
        } else if (gen->parsed()) {
            const std::uint64_t seed = require_seed("gen-data");
            const RegionAtlas a = atlas_from_json(read_json(atlas_path));
            const double tol = g.tol.value_or(1e-9);
            LabeledDataset d = populate(a, per_region, seed, tol);
            if (axis2) {
                const ExtendResult ext = second_axis_extend(a, *axis2, per_region, Rng(seed).split(1).next_u64(), tol);
                for (const auto& w : ext.warnings) std::cerr << "warning: " << w << "\n";
                std::cerr << "second axis: kept " << ext.data.rows() << " of " << ext.attempted << "\n";
                const Index n0 = d.rows(), n1 = ext.data.rows();
                d.inputs.conservativeResize(n0 + n1, Eigen::NoChange);
                d.targets.conservativeResize(n0 + n1, Eigen::NoChange);
                d.inputs.bottomRows(n1) = ext.data.inputs;
                d.targets.bottomRows(n1) = ext.data.targets;
                d.region_id.insert(d.region_id.end(), ext.data.region_id.begin(), ext.data.region_id.end());
            }
            emit(dataset_to_csv(d));
        } else if (mk->parsed()) {
            const std::uint64_t seed = require_seed("make-dataset");
            const GridCase c = load_case(case_name);
            const MatrixXd th = kind == "realistic" ? make_realistic_dataset(c, rows, seed) : make_extreme_dataset(c, rows, seed);
            if (label) {
                const QpProblem p = build_qp(c);
                Index dropped = 0;
                const LabeledDataset d = solution_dataset(p, th, &dropped);
                if (dropped) std::cerr << dropped << " infeasible rows dropped\n";
                emit(dataset_to_csv(d, solution_target_names(p)));
            } else {
                emit(dataset_to_csv(LabeledDataset{th, MatrixXd(th.rows(), 0), std::vector<Index>(static_cast<std::size_t>(th.rows()), -1)},
                                    std::vector<std::string>{}));
            }
        } else if (tr->parsed()) {
            tcfg.seed = require_seed("train");
            if (g.tol) tcfg.tol = *g.tol;
            tcfg.optimizer = optimizer == "gd" ? Optimizer::GradientDescent : Optimizer::Adam;
            const RegionAtlas a = atlas_from_json(read_json(atlas_path));
            const LabeledDataset train_set = dataset_from_csv(read_text(train_path));
            const LabeledDataset val_set = val_path.empty() ? LabeledDataset{} : dataset_from_csv(read_text(val_path));
            MuNet net = init_mu_net(a, train_set, tcfg.seed, init_mode_from_string(init));
            const TrainHistory h = train(net, train_set, val_set, tcfg);
            std::cerr << "epochs " << h.epochs << ", train MSE " << h.train_mse.back() << ", val MSE " << h.val_mse.back()
                      << (h.converged ? " (converged)" : " (epoch limit)") << "\n";
            PsnnModel m(std::move(net), a.problem);
            m.clamp = !no_clamp;
            m.training = {{"epochs", h.epochs},
                          {"converged", h.converged},
                          {"final_train_mse", h.train_mse.back()},
                          {"final_val_mse", h.val_mse.back()},
                          {"init", init},
                          {"optimizer", optimizer},
                          {"learning_rate", tcfg.learning_rate},
                          {"seed", tcfg.seed}};
            emit_json(model_to_json(m));
        } else if (trb->parsed()) {
            bcfg.seed = require_seed("train-baseline");
            const QpProblem p = build_qp(load_case(case_name));
            const LabeledDataset train_set = dataset_from_csv(read_text(train_path));
            const LabeledDataset val_set = val_path.empty() ? LabeledDataset{} : dataset_from_csv(read_text(val_path));
            DnnHistory h;
            const DnnModel m = train_baseline(p, train_set, val_set, bcfg, &h);
            std::cerr << "epochs " << h.epochs << ", best epoch " << h.best_epoch << ", val MSE "
                      << h.val_mse[static_cast<std::size_t>(h.best_epoch)] << "\n";
            emit_json(dnn_to_json(m));
        } else if (pr->parsed() || prb->parsed()) {
            const QpProblem p = build_qp(load_case(case_name));
            const MatrixXd th = read_thetas(input_path);
            BatchSolution s;
            if (pr->parsed()) {
                PsnnModel m = model_from_json(read_json(model_path));
                if (no_clamp) m.clamp = false;
                s = m.predict_batch(p, th);
            } else {
                s = dnn_predict_batch(dnn_from_json(read_json(model_path)), p, th);
            }
            if (format_or("csv") == "json") {
                json rows_j = json::array();
                for (Index i = 0; i < s.rows(); ++i) rows_j.push_back(solution_to_json(s.row(i)));
                emit_json(rows_j);
            } else {
                emit(solutions_csv(p, th, s));
            }
            if (!report_path.empty()) write_json(report_path, kkt_summary(p, th, s, g.tol.value_or(1e-8)));
        } else if (bench->parsed()) {
            const GridCase c = load_case(case_name);
            const QpProblem p = build_qp(c);
            if (g.tol) bopt.kkt_tol = *g.tol;
            std::map<std::string, MatrixXd> data;
            if (realistic_path.empty() || extreme_path.empty()) {
                const std::uint64_t seed = require_seed("benchmark");
                data["realistic"] = make_realistic_dataset(c, rows, Rng(seed).split(1).next_u64());
                data["extreme"] = make_extreme_dataset(c, rows, Rng(seed).split(2).next_u64());
            }
            if (!realistic_path.empty()) data["realistic"] = read_thetas(realistic_path);
            if (!extreme_path.empty()) data["extreme"] = read_thetas(extreme_path);
            const PsnnModel m = model_from_json(read_json(model_path));
            std::optional<DnnModel> dnn;
            if (!baseline_path.empty()) dnn = dnn_from_json(read_json(baseline_path));
            const BenchReport r = benchmark(p, c.name, m, dnn ? &*dnn : nullptr, data, bopt);
            const std::string f = format_or("table");
            if (f == "json")
                emit_json(bench_to_json(r));
            else if (f == "csv")
                emit(bench_to_csv(r));
            else
                emit(bench_to_table(r));
        } else if (sim->parsed()) {
            scfg.seed = require_seed("simulate");
            if (g.tol) scfg.kkt_tol = *g.tol;
            const GridCase c = load_case(case_name);
            if (scalers_path.empty()) {
                scfg.scalers = default_scalers();
                scfg.scaler_source = "shipped stand-in daily profile (not a measured trace)";
            } else {
                scfg.scalers = read_scalers(read_text(scalers_path));
                scfg.scaler_source = scalers_path;
            }
            const SimResult r = simulate_uncertainty(model_from_json(read_json(model_path)), c, scfg);
            std::cerr << r.rows() << " predictions in " << r.predict_seconds << " s, " << r.failures()
                      << " rows above the KKT tolerance\n";
            if (g.out.empty()) {
                std::cout << dispatch_quantiles_csv(r, c);
            } else {
                write_text(g.out + "_dispatch.csv", dispatch_quantiles_csv(r, c));
                write_text(g.out + "_duals.csv", dual_summary_csv(r, c));
                write_json(g.out + "_meta.json", r.meta);
            }
        } else if (sw->parsed()) {
            const QpProblem p = build_qp(load_case(case_name));
            emit(sweep_report(p, theta_or_default(theta, p.num_varying(), 0.01), axis, from, to, step));
        } else if (conv->parsed()) {
            GridCase c = parse_case(read_text(input_path), cost_scale);
            if (!case_label.empty())
                c.name = case_label;
            else if (c.name.empty())
                c.name = std::filesystem::path(input_path).stem().string();
            emit_json(case_to_json(c));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
