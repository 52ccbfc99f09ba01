#include "mpqp/baseline.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/oracle.hpp"
#include "mpqp/rng.hpp"

#include <cmath>
#include <numeric>

namespace mpqp {

std::vector<Index> DnnModel::sizes() const {
    std::vector<Index> s{inputs()};
    for (const auto& w : W) s.push_back(w.rows());
    return s;
}

DnnModel make_dnn(const QpProblem& problem, const std::vector<Index>& hidden, std::uint64_t seed) {
    for (Index h : hidden)
        if (h <= 0) throw ValidationError("hidden layer sizes must be positive");
    DnnModel m;
    m.n = problem.n();
    m.m1 = problem.m1();
    m.m2 = problem.m2();
    m.fingerprint = fingerprint(problem);
    std::vector<Index> sizes{problem.num_varying()};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(m.n + m.m1 + m.m2);

    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double s = std::sqrt(6.0 / static_cast<double>(sizes[l]));
        MatrixXd w(sizes[l + 1], sizes[l]);
        for (Index c = 0; c < w.cols(); ++c)
            for (Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-s, s);
        m.W.push_back(std::move(w));
        m.b.push_back(VectorXd::Zero(sizes[l + 1]));
    }
    m.in_mean = VectorXd::Zero(sizes.front());
    m.in_scale = VectorXd::Ones(sizes.front());
    m.out_mean = VectorXd::Zero(sizes.back());
    m.out_scale = VectorXd::Ones(sizes.back());
    return m;
}

std::vector<std::string> solution_target_names(const QpProblem& problem) {
    std::vector<std::string> names;
    for (Index i = 0; i < problem.n(); ++i) names.push_back("x_" + std::to_string(i));
    for (Index i = 0; i < problem.m1(); ++i) names.push_back("lambda_" + std::to_string(i));
    for (Index i = 0; i < problem.m2(); ++i) names.push_back("mu_" + std::to_string(i));
    return names;
}

LabeledDataset solution_dataset(const QpProblem& problem, const MatrixXd& thetas, Index* dropped) {
    const Index width = problem.n() + problem.m1() + problem.m2();
    std::vector<VectorXd> in, out;
    Index skipped = 0;
    for (Index i = 0; i < thetas.rows(); ++i) {
        const VectorXd v = thetas.row(i).transpose();
        try {
            const OracleResult r = solve_auto(problem, ParamPoint::from_varying(problem, v));
            VectorXd t(width);
            t << r.solution.x, r.solution.lambda, r.solution.mu;
            in.push_back(v);
            out.push_back(std::move(t));
        } catch (const Infeasible&) {
            ++skipped;
        }
    }
    if (dropped) *dropped = skipped;
    LabeledDataset d{MatrixXd(static_cast<Index>(in.size()), thetas.cols()), MatrixXd(static_cast<Index>(out.size()), width),
                     std::vector<Index>(in.size(), -1)};
    for (std::size_t i = 0; i < in.size(); ++i) {
        d.inputs.row(static_cast<Index>(i)) = in[i].transpose();
        d.targets.row(static_cast<Index>(i)) = out[i].transpose();
    }
    return d;
}

namespace {

// Forward pass on standardized inputs, keeping every pre-activation.
std::vector<MatrixXd> forward_std(const DnnModel& m, const MatrixXd& xs) {
    std::vector<MatrixXd> z;
    z.reserve(m.W.size());
    MatrixXd h = xs;
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        z.push_back((h * m.W[l].transpose()).rowwise() + m.b[l].transpose());
        if (l + 1 < m.W.size()) h = z.back().cwiseMax(0.0);
    }
    return z;
}

MatrixXd standardize(const MatrixXd& a, const VectorXd& mean, const VectorXd& scale) {
    const VectorXd inv = scale.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 0.0; });
    return (a.rowwise() - mean.transpose()).array().rowwise() * inv.transpose().array();
}

void check_width(const DnnModel& m, Index cols) {
    if (cols != m.inputs())
        throw ValidationError("baseline expects " + std::to_string(m.inputs()) + " inputs, got " + std::to_string(cols));
}

}  // namespace

MatrixXd dnn_forward(const DnnModel& model, const MatrixXd& thetas) {
    check_width(model, thetas.cols());
    const MatrixXd out = forward_std(model, standardize(thetas, model.in_mean, model.in_scale)).back();
    return (out.array().rowwise() * model.out_scale.transpose().array()).rowwise() + model.out_mean.transpose().array();
}

DnnGradient dnn_loss_gradient(const DnnModel& model, const MatrixXd& inputs, const MatrixXd& targets) {
    check_width(model, inputs.cols());
    if (targets.rows() != inputs.rows() || targets.cols() != model.outputs())
        throw ValidationError("dnn_loss_gradient: target shape mismatch");
    const std::vector<MatrixXd> z = forward_std(model, inputs);
    const MatrixXd err = z.back() - targets;
    const double scale = 1.0 / static_cast<double>(targets.size());

    DnnGradient g;
    g.loss = err.squaredNorm() * scale;
    const std::size_t L = model.W.size();
    g.W.resize(L);
    g.b.resize(L);
    MatrixXd dz = 2.0 * scale * err;
    for (std::size_t l = L; l-- > 0;) {
        const MatrixXd h = l == 0 ? inputs : MatrixXd(z[l - 1].cwiseMax(0.0));
        g.W[l] = dz.transpose() * h;
        g.b[l] = dz.colwise().sum().transpose();
        if (l > 0) dz = (dz * model.W[l]).cwiseProduct((z[l - 1].array() > 0.0).cast<double>().matrix());
    }
    return g;
}

DnnModel train_baseline(const QpProblem& problem, const LabeledDataset& train, const LabeledDataset& val,
                        const DnnTrainConfig& cfg, DnnHistory* history) {
    const Index N = train.rows();
    if (N == 0) throw ValidationError("train_baseline: empty training set");
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size <= 0 || cfg.patience <= 0)
        throw ValidationError("train_baseline: learning rate, batch size and patience must be positive");
    DnnModel m = make_dnn(problem, cfg.hidden, cfg.seed);
    check_width(m, train.inputs.cols());
    if (train.targets.cols() != m.outputs())
        throw ValidationError("train_baseline: targets must be [x; lambda; mu] with " + std::to_string(m.outputs()) + " columns");

    // A constant column gets scale 0: inputs ignore it, outputs reproduce the mean exactly.
    auto fit_scale = [](const MatrixXd& a, VectorXd& mean, VectorXd& scale) {
        mean = a.colwise().mean().transpose();
        scale = ((a.rowwise() - mean.transpose()).colwise().squaredNorm() / static_cast<double>(a.rows())).cwiseSqrt().transpose();
        for (Index i = 0; i < scale.size(); ++i)
            if (!(scale[i] > 1e-12 * std::max(1.0, std::abs(mean[i])))) scale[i] = 0.0;
    };
    fit_scale(train.inputs, m.in_mean, m.in_scale);
    fit_scale(train.targets, m.out_mean, m.out_scale);
    const MatrixXd xs = standardize(train.inputs, m.in_mean, m.in_scale);
    const MatrixXd ys = standardize(train.targets, m.out_mean, m.out_scale);
    const bool has_val = val.rows() > 0;
    const MatrixXd xv = has_val ? standardize(val.inputs, m.in_mean, m.in_scale) : xs;
    const MatrixXd yv = has_val ? standardize(val.targets, m.out_mean, m.out_scale) : ys;

    const std::size_t L = m.W.size();
    std::vector<MatrixXd> mw(L), vw(L);
    std::vector<VectorXd> mb(L), vb(L);
    for (std::size_t l = 0; l < L; ++l) {
        mw[l] = vw[l] = MatrixXd::Zero(m.W[l].rows(), m.W[l].cols());
        mb[l] = vb[l] = VectorXd::Zero(m.b[l].size());
    }
    double pow1 = 1.0, pow2 = 1.0;
    std::vector<Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Index{0});
    const Rng root = Rng(cfg.seed).split(0x5eed);

    DnnHistory h;
    DnnModel best = m;
    double best_val = std::numeric_limits<double>::infinity();
    auto val_loss = [&] { return (forward_std(m, xv).back() - yv).squaredNorm() / static_cast<double>(yv.size()); };

    for (Index epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng rng = root.split(static_cast<std::uint64_t>(epoch));
        for (Index i = N - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i + 1))]);
        double epoch_loss = 0.0;
        for (Index start = 0; start < N; start += cfg.batch_size) {
            const Index len = std::min(cfg.batch_size, N - start);
            MatrixXd xb(len, xs.cols()), yb(len, ys.cols());
            for (Index r = 0; r < len; ++r) {
                xb.row(r) = xs.row(order[static_cast<std::size_t>(start + r)]);
                yb.row(r) = ys.row(order[static_cast<std::size_t>(start + r)]);
            }
            const DnnGradient g = dnn_loss_gradient(m, xb, yb);
            if (!std::isfinite(g.loss))
                throw NonFiniteLoss("train_baseline: loss became non-finite at epoch " + std::to_string(epoch));
            epoch_loss += g.loss * static_cast<double>(len);
            pow1 *= cfg.beta1;
            pow2 *= cfg.beta2;
            const double lr = cfg.learning_rate * std::sqrt(1.0 - pow2) / (1.0 - pow1);
            for (std::size_t l = 0; l < L; ++l) {
                mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * g.W[l];
                vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * g.W[l].cwiseAbs2();
                mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * g.b[l];
                vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * g.b[l].cwiseAbs2();
                m.W[l].array() -= lr * mw[l].array() / (vw[l].array().sqrt() + cfg.epsilon);
                m.b[l].array() -= lr * mb[l].array() / (vb[l].array().sqrt() + cfg.epsilon);
            }
        }
        const double vl = val_loss();
        if (!std::isfinite(vl)) throw NonFiniteLoss("train_baseline: validation loss became non-finite");
        h.train_mse.push_back(epoch_loss / static_cast<double>(N));
        h.val_mse.push_back(vl);
        h.epochs = epoch + 1;
        if (vl < best_val) {
            best_val = vl;
            best = m;
            h.best_epoch = epoch;
        } else if (epoch - h.best_epoch >= cfg.patience) {
            break;
        }
    }
    if (history) *history = std::move(h);
    return best;
}

BatchSolution dnn_predict_batch(const DnnModel& model, const QpProblem& problem, const MatrixXd& thetas) {
    if (fingerprint(problem) != model.fingerprint)
        throw FingerprintMismatch("baseline was trained for problem " + model.fingerprint + ", got " + fingerprint(problem));
    const MatrixXd out = dnn_forward(model, thetas);
    return {out.leftCols(model.n), out.middleCols(model.n, model.m1), out.rightCols(model.m2)};
}

FullSolution dnn_predict(const DnnModel& model, const QpProblem& problem, const ParamPoint& p) {
    return dnn_predict_batch(model, problem, p.varying(problem).transpose()).row(0);
}

json dnn_to_json(const DnnModel& model) {
    json layers = json::array();
    for (std::size_t l = 0; l < model.W.size(); ++l)
        layers.push_back({{"W", matrix_to_json(model.W[l])}, {"b", vector_to_json(model.b[l])}});
    return {{"schema_version", kSchemaVersion},
            {"kind", "mpqp.dnn"},
            {"fingerprint", model.fingerprint},
            {"dims", {{"n", model.n}, {"m1", model.m1}, {"m2", model.m2}}},
            {"layers", layers},
            {"in_mean", vector_to_json(model.in_mean)},
            {"in_scale", vector_to_json(model.in_scale)},
            {"out_mean", vector_to_json(model.out_mean)},
            {"out_scale", vector_to_json(model.out_scale)}};
}

DnnModel dnn_from_json(const json& j) {
    DnnModel m;
    try {
        if (j.at("kind").get<std::string>() != "mpqp.dnn") throw ParseError("baseline: unexpected document kind");
        m.fingerprint = j.at("fingerprint").get<std::string>();
        m.n = j.at("dims").at("n").get<Index>();
        m.m1 = j.at("dims").at("m1").get<Index>();
        m.m2 = j.at("dims").at("m2").get<Index>();
        for (const auto& layer : j.at("layers")) {
            m.W.push_back(matrix_from_json(layer.at("W"), "W"));
            m.b.push_back(vector_from_json(layer.at("b"), "b"));
        }
        m.in_mean = vector_from_json(j.at("in_mean"), "in_mean");
        m.in_scale = vector_from_json(j.at("in_scale"), "in_scale");
        m.out_mean = vector_from_json(j.at("out_mean"), "out_mean");
        m.out_scale = vector_from_json(j.at("out_scale"), "out_scale");
    } catch (const json::exception& e) {
        throw ParseError(std::string("baseline: ") + e.what());
    }
    if (m.W.empty()) throw ParseError("baseline: no layers");
    for (std::size_t l = 0; l < m.W.size(); ++l) {
        if (m.b[l].size() != m.W[l].rows() || (l > 0 && m.W[l].cols() != m.W[l - 1].rows()))
            throw ParseError("baseline: inconsistent layer shapes at layer " + std::to_string(l));
    }
    if (m.outputs() != m.n + m.m1 + m.m2 || m.in_mean.size() != m.inputs() || m.in_scale.size() != m.inputs() ||
        m.out_mean.size() != m.outputs() || m.out_scale.size() != m.outputs())
        throw ParseError("baseline: standardization vectors do not match layer sizes");
    return m;
}

}  // namespace mpqp
