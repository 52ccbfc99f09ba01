#include "mpqp/baseline.hpp"
#include "mpqp/bench.hpp"
#include "mpqp/dcopf.hpp"
#include "mpqp/discovery.hpp"
#include "mpqp/errors.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/psnn.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mpqp;

namespace {

// Documents cross the boundary as JSON text; the Python layer parses them.
json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(e.what());
    }
}

py::dict solution_dict(const FullSolution& s) {
    py::dict d;
    d["x"] = s.x;
    d["lambda"] = s.lambda;
    d["mu"] = s.mu;
    return d;
}

py::dict batch_dict(const BatchSolution& b) {
    py::dict d;
    d["x"] = b.x;
    d["lambda"] = b.lambda;
    d["mu"] = b.mu;
    return d;
}

OracleResult run_oracle(const QpProblem& p, const ParamPoint& pt, const std::string& method) {
    if (method == "auto") return solve_auto(p, pt);
    if (method == "active-set") return solve_active_set(p, pt);
    if (method == "enumerate") return solve_enumerate(p, pt);
    throw ValidationError("unknown method: " + method + " (expected auto, active-set or enumerate)");
}

}  // namespace

PYBIND11_MODULE(_mpqp, m) {
    m.doc() = "Native core of the mpqp package.";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    static py::exception<Error> validation(m, "ValidationError", base.ptr());
    static py::exception<Error> infeasible(m, "InfeasibleError", base.ptr());
    static py::exception<Error> fingerprint_error(m, "FingerprintMismatch", validation.ptr());
    static py::exception<Error> numeric(m, "NumericError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const FingerprintMismatch& e) {
            py::set_error(fingerprint_error, e.what());
        } catch (const Error& e) {
            switch (e.kind()) {
                case ErrorKind::Validation: py::set_error(validation, e.what()); break;
                case ErrorKind::Infeasible: py::set_error(infeasible, e.what()); break;
                case ErrorKind::Numeric: py::set_error(numeric, e.what()); break;
            }
        }
    });

    m.def("load_case", [](const std::string& name) { return case_to_json(load_case(name)).dump(); },
          py::arg("name"));
    m.def("build_qp", [](const std::string& grid) { return problem_to_json(build_qp(case_from_json(parse(grid)))).dump(); },
          py::arg("case"));
    m.def("fingerprint", [](const std::string& problem) { return fingerprint(problem_from_json(parse(problem))); },
          py::arg("problem"));
    m.def("num_varying", [](const std::string& problem) { return problem_from_json(parse(problem)).num_varying(); },
          py::arg("problem"));
    m.def("realistic_dataset",
          [](const std::string& grid, Index n, std::uint64_t seed) {
              return make_realistic_dataset(case_from_json(parse(grid)), n, seed);
          },
          py::arg("case"), py::arg("n"), py::arg("seed"));
    m.def("extreme_dataset",
          [](const std::string& grid, Index n, std::uint64_t seed) {
              return make_extreme_dataset(case_from_json(parse(grid)), n, seed);
          },
          py::arg("case"), py::arg("n"), py::arg("seed"));

    m.def("solve",
          [](const std::string& problem, const VectorXd& theta, const std::string& method) {
              const QpProblem p = problem_from_json(parse(problem));
              const OracleResult r = run_oracle(p, ParamPoint::from_varying(p, theta), method);
              py::dict d = solution_dict(r.solution);
              d["active_set"] = r.active_set.indices();
              d["method"] = to_string(r.method);
              return d;
          },
          py::arg("problem"), py::arg("theta"), py::arg("method") = "auto");
    m.def("kkt_report",
          [](const std::string& problem, const VectorXd& theta, const VectorXd& x, const VectorXd& lambda,
             const VectorXd& mu) {
              const QpProblem p = problem_from_json(parse(problem));
              return report_to_json(kkt_report(p, ParamPoint::from_varying(p, theta), {x, lambda, mu})).dump();
          },
          py::arg("problem"), py::arg("theta"), py::arg("x"), py::arg("lambda_"), py::arg("mu"));

    m.def("discover",
          [](const std::string& problem, const VectorXd& theta0, Index axis, double theta_plus, double alpha,
             double tol, bool refine) {
              DiscoverOptions o;
              o.alpha = alpha;
              o.tol = tol;
              o.refine = refine;
              return atlas_to_json(discover(problem_from_json(parse(problem)), theta0, axis, theta_plus, o)).dump();
          },
          py::arg("problem"), py::arg("theta0"), py::arg("axis"), py::arg("theta_plus"), py::arg("alpha") = 0.01,
          py::arg("tol") = 1e-8, py::arg("refine") = false);
    m.def("populate",
          [](const std::string& atlas, Index per_region, std::uint64_t seed) {
              const LabeledDataset d = populate(atlas_from_json(parse(atlas)), per_region, seed);
              return py::make_tuple(d.inputs, d.targets, d.region_id);
          },
          py::arg("atlas"), py::arg("per_region"), py::arg("seed"));

    m.def("train_psnn",
          [](const std::string& atlas_text, Index per_region, std::uint64_t seed, const std::string& init,
             Index max_epochs, double learning_rate) {
              const RegionAtlas atlas = atlas_from_json(parse(atlas_text));
              const LabeledDataset tr = populate(atlas, per_region, seed);
              const LabeledDataset va = populate(atlas, std::max<Index>(1, per_region / 5), seed + 1);
              MuNet net = init_mu_net(atlas, tr, seed, init_mode_from_string(init));
              TrainConfig cfg;
              cfg.seed = seed;
              cfg.max_epochs = max_epochs;
              cfg.learning_rate = learning_rate;
              TrainHistory h;
              {
                  py::gil_scoped_release release;
                  h = train(net, tr, va, cfg);
              }
              PsnnModel model(std::move(net), atlas.problem);
              model.training = {{"epochs", h.epochs},
                                {"converged", h.converged},
                                {"init", init},
                                {"train_mse", h.train_mse.empty() ? 0.0 : h.train_mse.back()}};
              return model_to_json(model).dump();
          },
          py::arg("atlas"), py::arg("per_region") = 200, py::arg("seed") = 0, py::arg("init") = "warm",
          py::arg("max_epochs") = 50000, py::arg("learning_rate") = 1e-3);
    m.def("predict",
          [](const std::string& model_text, const MatrixXd& thetas, bool clamp) {
              PsnnModel model = model_from_json(parse(model_text));
              model.clamp = clamp;
              return batch_dict(model.predict_batch(model.problem(), thetas));
          },
          py::arg("model"), py::arg("thetas"), py::arg("clamp") = true);

    m.def("train_baseline",
          [](const std::string& problem_text, const MatrixXd& train_thetas, const MatrixXd& val_thetas,
             std::uint64_t seed, Index max_epochs, std::vector<Index> hidden) {
              const QpProblem p = problem_from_json(parse(problem_text));
              DnnTrainConfig cfg;
              cfg.seed = seed;
              cfg.max_epochs = max_epochs;
              cfg.hidden = std::move(hidden);
              py::gil_scoped_release release;
              const LabeledDataset tr = solution_dataset(p, train_thetas);
              const LabeledDataset va = solution_dataset(p, val_thetas);
              return dnn_to_json(train_baseline(p, tr, va, cfg)).dump();
          },
          py::arg("problem"), py::arg("train_thetas"), py::arg("val_thetas"), py::arg("seed") = 0,
          py::arg("max_epochs") = 1000, py::arg("hidden") = std::vector<Index>{64, 64, 64});
    m.def("predict_baseline",
          [](const std::string& model_text, const std::string& problem_text, const MatrixXd& thetas) {
              return batch_dict(dnn_predict_batch(dnn_from_json(parse(model_text)), problem_from_json(parse(problem_text)),
                                                  thetas));
          },
          py::arg("model"), py::arg("problem"), py::arg("thetas"));
}
