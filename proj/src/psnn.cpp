#include "mpqp/psnn.hpp"

#include "mpqp/errors.hpp"
#include "mpqp/qp_core.hpp"
#include "mpqp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace mpqp {

std::string w0_checksum(const MuNet& net) {
    std::string bytes(reinterpret_cast<const char*>(net.W0.data()), static_cast<std::size_t>(net.W0.size()) * sizeof(double));
    bytes += std::to_string(net.W0.rows()) + "x" + std::to_string(net.W0.cols());
    return fnv1a_hex(bytes);
}

MuNet build_mu_net(const RegionAtlas& atlas, std::uint64_t seed, bool analytic_init) {
    if (atlas.regions.empty()) throw ValidationError("build_mu_net: atlas has no regions");
    const Index m2 = atlas.problem.m2(), nv = atlas.num_varying();
    const auto first = atlas.distinct_region_index();
    const Index k = static_cast<Index>(first.size());

    MuNet net;
    net.m2 = m2;
    net.W0 = MatrixXd::Zero(k * m2, nv);
    for (Index i = 0; i < k; ++i) {
        const CriticalRegion& r = atlas.regions[first[static_cast<std::size_t>(i)]];
        net.blocks.push_back(r.active_set);
        Index b = 0;
        for (Index j : r.active_set) net.W0.row(i * m2 + j) = r.slopes.row(b++);
    }

    Rng rng(seed);
    const double s0 = 1.0 / std::sqrt(static_cast<double>(std::max<Index>(nv, 1)));
    const double s1 = 1.0 / std::sqrt(static_cast<double>(k * m2));
    net.b0 = VectorXd(k * m2);
    for (Index h = 0; h < net.b0.size(); ++h) net.b0[h] = rng.uniform(-s0, s0);
    net.W1 = MatrixXd(m2, k * m2);
    for (Index c = 0; c < net.W1.cols(); ++c)
        for (Index j = 0; j < m2; ++j) net.W1(j, c) = rng.uniform(-s1, s1);

    if (analytic_init) {
        net.b0.setZero();
        net.W1.setZero();
        for (Index i = 0; i < k; ++i) {
            const CriticalRegion& r = atlas.regions[first[static_cast<std::size_t>(i)]];
            Index b = 0;
            for (Index j : r.active_set) {
                net.b0[i * m2 + j] = r.intercept[b++];
                net.W1(j, i * m2 + j) = 1.0;
            }
        }
    }
    return net;
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "random") return InitMode::Random;
    if (s == "analytic") return InitMode::Analytic;
    if (s == "warm") return InitMode::WarmStart;
    throw ValidationError("unknown init mode '" + s + "' (expected random, analytic or warm)");
}

std::string to_string(InitMode m) {
    switch (m) {
        case InitMode::Random: return "random";
        case InitMode::Analytic: return "analytic";
        case InitMode::WarmStart: return "warm";
    }
    return "?";
}

MuNet init_mu_net(const RegionAtlas& atlas, const LabeledDataset& train, std::uint64_t seed, InitMode mode) {
    MuNet net = build_mu_net(atlas, seed, mode != InitMode::Random);
    if (mode == InitMode::WarmStart) fit_output_layer(net, train);
    return net;
}

namespace {

void check_inputs(const MuNet& net, Index cols) {
    if (cols != net.inputs())
        throw ValidationError("mu net expects " + std::to_string(net.inputs()) + " inputs, got " + std::to_string(cols));
}

}  // namespace

MatrixXd mu_forward(const MuNet& net, const MatrixXd& thetas) {
    check_inputs(net, thetas.cols());
    const MatrixXd pre = (thetas * net.W0.transpose()).rowwise() + net.b0.transpose();
    return pre.cwiseMax(0.0) * net.W1.transpose();
}

VectorXd mu_forward(const MuNet& net, const VectorXd& theta) {
    check_inputs(net, theta.size());
    return net.W1 * (net.W0 * theta + net.b0).cwiseMax(0.0);
}

double mu_mse(const MuNet& net, const LabeledDataset& data) {
    if (data.rows() == 0) return 0.0;
    return (mu_forward(net, data.inputs) - data.targets).squaredNorm() / static_cast<double>(data.targets.size());
}

void fit_output_layer(MuNet& net, const LabeledDataset& data) {
    const MatrixXd act = ((data.inputs * net.W0.transpose()).rowwise() + net.b0.transpose()).cwiseMax(0.0);
    net.W1 = act.completeOrthogonalDecomposition().solve(data.targets).transpose();
}

MuGradient mu_loss_gradient(const MuNet& net, const MatrixXd& inputs, const MatrixXd& targets) {
    check_inputs(net, inputs.cols());
    if (targets.rows() != inputs.rows() || targets.cols() != net.m2)
        throw ValidationError("mu_loss_gradient: target shape mismatch");
    const double scale = 1.0 / static_cast<double>(targets.size());
    const MatrixXd pre = (inputs * net.W0.transpose()).rowwise() + net.b0.transpose();
    const MatrixXd act = pre.cwiseMax(0.0);
    const MatrixXd err = act * net.W1.transpose() - targets;

    MuGradient g;
    g.loss = err.squaredNorm() * scale;
    const MatrixXd d_out = 2.0 * scale * err;
    g.W1 = d_out.transpose() * act;
    const MatrixXd d_pre = (d_out * net.W1).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    g.b0 = d_pre.colwise().sum().transpose();
    return g;
}

TrainHistory train(MuNet& net, const LabeledDataset& data, const LabeledDataset& val, const TrainConfig& cfg) {
    if (data.rows() == 0) throw ValidationError("train: empty training set");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("train: learning rate must be positive");
    check_inputs(net, data.inputs.cols());
    const std::string frozen = w0_checksum(net);

    const Index n = data.rows();
    const bool full = cfg.batch_size <= 0 || cfg.batch_size >= n;
    const Index batch = full ? n : cfg.batch_size;

    VectorXd mb = VectorXd::Zero(net.b0.size()), vb = mb;
    MatrixXd mw = MatrixXd::Zero(net.W1.rows(), net.W1.cols()), vw = mw;
    double pow1 = 1.0, pow2 = 1.0;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    const Rng root(cfg.seed);

    auto step = [&](const MuGradient& g) {
        if (cfg.optimizer == Optimizer::GradientDescent) {
            net.b0 -= cfg.learning_rate * g.b0;
            net.W1 -= cfg.learning_rate * g.W1;
            return;
        }
        pow1 *= cfg.beta1;
        pow2 *= cfg.beta2;
        const double lr = cfg.learning_rate * std::sqrt(1.0 - pow2) / (1.0 - pow1);
        mb = cfg.beta1 * mb + (1.0 - cfg.beta1) * g.b0;
        vb = cfg.beta2 * vb + (1.0 - cfg.beta2) * g.b0.cwiseAbs2();
        mw = cfg.beta1 * mw + (1.0 - cfg.beta1) * g.W1;
        vw = cfg.beta2 * vw + (1.0 - cfg.beta2) * g.W1.cwiseAbs2();
        net.b0.array() -= lr * mb.array() / (vb.array().sqrt() + cfg.epsilon);
        net.W1.array() -= lr * mw.array() / (vw.array().sqrt() + cfg.epsilon);
    };

    TrainHistory h;
    for (Index epoch = 0;; ++epoch) {
        MuGradient g = mu_loss_gradient(net, data.inputs, data.targets);
        const double vloss = val.rows() > 0 ? mu_mse(net, val) : g.loss;
        if (!std::isfinite(g.loss) || !std::isfinite(vloss))
            throw NonFiniteLoss("train: loss became non-finite at epoch " + std::to_string(epoch) +
                                " (learning rate too high?)");
        h.train_mse.push_back(g.loss);
        h.val_mse.push_back(vloss);
        if (vloss < cfg.tol && g.loss < cfg.tol) {
            h.converged = true;
            break;
        }
        if (epoch == cfg.max_epochs) break;

        if (full) {
            step(g);
        } else {
            Rng rng = root.split(static_cast<std::uint64_t>(epoch));
            for (Index i = n - 1; i > 0; --i)
                std::swap(order[static_cast<std::size_t>(i)],
                          order[static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(i + 1))]);
            for (Index start = 0; start < n; start += batch) {
                const Index len = std::min(batch, n - start);
                MatrixXd xi(len, data.inputs.cols()), yi(len, data.targets.cols());
                for (Index r = 0; r < len; ++r) {
                    xi.row(r) = data.inputs.row(order[static_cast<std::size_t>(start + r)]);
                    yi.row(r) = data.targets.row(order[static_cast<std::size_t>(start + r)]);
                }
                step(mu_loss_gradient(net, xi, yi));
            }
        }
        h.epochs = epoch + 1;
    }
    if (w0_checksum(net) != frozen) throw ValidationError("train: frozen layer was modified");
    return h;
}

FullSolution BatchSolution::row(Index i) const {
    return {x.row(i).transpose(), lambda.row(i).transpose(), mu.row(i).transpose()};
}

PsnnModel::PsnnModel(MuNet net, const QpProblem& problem)
    : net_(std::move(net)), problem_(problem), fingerprint_(mpqp::fingerprint(problem)) {
    if (net_.m2 != problem.m2() || net_.inputs() != problem.num_varying())
        throw ValidationError("PsnnModel: network shape does not match the problem");
    n_ = problem.n();
    m1_ = problem.m1();
    g_ = EqualityFactor(problem).inverse();

    // g(μ; θ) = G [-C - θ_c - Acᵀμ; -be - θ_e] split into constant, θ and μ parts.
    const Index nz = n_ + m1_, nv = problem.num_varying(), m2 = problem.m2();
    VectorXd rhs0(nz);
    rhs0 << -problem.C, -problem.be;
    const VectorXd z0 = g_ * rhs0;
    const MatrixXd zmu = -g_.leftCols(n_) * problem.Ac.transpose();
    MatrixXd ztheta = MatrixXd::Zero(nz, nv);
    const auto slots = problem.varying_slots();
    for (std::size_t k = 0; k < slots.size(); ++k)
        if (slots[k] < nz) ztheta.col(static_cast<Index>(k)) = -g_.col(slots[k]);

    z0_.assign(z0.data(), z0.data() + nz);
    // column-major so each parameter contributes one contiguous axpy
    z_theta_.resize(static_cast<std::size_t>(nz * nv));
    z_mu_.resize(static_cast<std::size_t>(nz * m2));
    for (Index r = 0; r < nz; ++r) {
        for (Index k = 0; k < nv; ++k) z_theta_[static_cast<std::size_t>(k * nz + r)] = ztheta(r, k);
        for (Index j = 0; j < m2; ++j) z_mu_[static_cast<std::size_t>(j * nz + r)] = zmu(r, j);
    }
    refresh();
}

void PsnnModel::refresh() {
    const Index H = net_.hidden(), nv = net_.inputs(), m2 = net_.m2;
    // Rows of W0 that are entirely zero give a constant unit; only the rest
    // are evaluated per row.
    live_.clear();
    w0_.clear();
    hidden_const_.assign(static_cast<std::size_t>(H), 0.0);
    for (Index h = 0; h < H; ++h) {
        if (net_.W0.row(h).isZero(0.0)) {
            hidden_const_[static_cast<std::size_t>(h)] = std::max(net_.b0[h], 0.0);
            continue;
        }
        live_.push_back(h);
        for (Index k = 0; k < nv; ++k) w0_.push_back(net_.W0(h, k));
    }
    w1_.resize(static_cast<std::size_t>(m2 * H));
    for (Index j = 0; j < m2; ++j)
        for (Index h = 0; h < H; ++h) w1_[static_cast<std::size_t>(j * H + h)] = net_.W1(j, h);
    b0_.assign(net_.b0.data(), net_.b0.data() + H);
}

void PsnnModel::check(const QpProblem& problem) const {
    if (mpqp::fingerprint(problem) != fingerprint_)
        throw FingerprintMismatch("model was built for problem " + fingerprint_ + ", got " + mpqp::fingerprint(problem));
}

// The one prediction kernel. Every sum runs in a fixed order so a row gives
// bit-identical output whether predicted alone or inside a batch. Terms
// skipped for a zero factor would only have added zero.
void PsnnModel::predict_row(const double* theta, double* hidden, double* mu, double* z) const {
    const Index H = net_.hidden(), nv = net_.inputs(), m2 = net_.m2, nz = n_ + m1_;
    std::copy(hidden_const_.begin(), hidden_const_.end(), hidden);
    for (std::size_t u = 0; u < live_.size(); ++u) {
        const Index h = live_[u];
        const double* w = &w0_[u * static_cast<std::size_t>(nv)];
        double acc = b0_[static_cast<std::size_t>(h)];
        for (Index k = 0; k < nv; ++k) acc += w[k] * theta[k];
        hidden[h] = acc > 0.0 ? acc : 0.0;
    }
    for (Index j = 0; j < m2; ++j) {
        const double* w = &w1_[static_cast<std::size_t>(j * H)];
        double acc = 0.0;
        for (Index h = 0; h < H; ++h) acc += w[h] * hidden[h];
        mu[j] = (clamp && acc < 0.0) ? 0.0 : acc;
    }
    std::copy(z0_.begin(), z0_.end(), z);
    for (Index k = 0; k < nv; ++k) {
        const double t = theta[k];
        if (t == 0.0) continue;
        const double* col = &z_theta_[static_cast<std::size_t>(k * nz)];
        for (Index r = 0; r < nz; ++r) z[r] += col[r] * t;
    }
    for (Index j = 0; j < m2; ++j) {
        const double t = mu[j];
        if (t == 0.0) continue;
        const double* col = &z_mu_[static_cast<std::size_t>(j * nz)];
        for (Index r = 0; r < nz; ++r) z[r] += col[r] * t;
    }
}

FullSolution PsnnModel::predict(const QpProblem& problem, const ParamPoint& p) const {
    const VectorXd theta = p.varying(problem);
    const BatchSolution b = predict_batch(problem, theta.transpose());
    return b.row(0);
}

BatchSolution PsnnModel::predict_batch(const QpProblem& problem, const MatrixXd& thetas) const {
    check(problem);
    check_inputs(net_, thetas.cols());
    const Index N = thetas.rows(), nv = thetas.cols(), m2 = net_.m2, nz = n_ + m1_;
    BatchSolution out{MatrixXd(N, n_), MatrixXd(N, m1_), MatrixXd(N, m2)};
    std::vector<double> theta(static_cast<std::size_t>(nv)), hidden(static_cast<std::size_t>(net_.hidden())),
        mu(static_cast<std::size_t>(m2)), z(static_cast<std::size_t>(nz));
    for (Index i = 0; i < N; ++i) {
        for (Index k = 0; k < nv; ++k) theta[static_cast<std::size_t>(k)] = thetas(i, k);
        predict_row(theta.data(), hidden.data(), mu.data(), z.data());
        for (Index r = 0; r < n_; ++r) out.x(i, r) = z[static_cast<std::size_t>(r)];
        for (Index r = 0; r < m1_; ++r) out.lambda(i, r) = z[static_cast<std::size_t>(n_ + r)];
        for (Index j = 0; j < m2; ++j) out.mu(i, j) = mu[static_cast<std::size_t>(j)];
    }
    return out;
}

FullSolution predict_solution(const PsnnModel& model, const QpProblem& problem, const ParamPoint& p) {
    return model.predict(problem, p);
}

BatchSolution batch_predict(const PsnnModel& model, const QpProblem& problem, const MatrixXd& thetas) {
    return model.predict_batch(problem, thetas);
}

json net_to_json(const MuNet& net) {
    json blocks = json::array();
    for (const auto& b : net.blocks) blocks.push_back(b.indices());
    return {{"W0", matrix_to_json(net.W0)},
            {"b0", vector_to_json(net.b0)},
            {"W1", matrix_to_json(net.W1)},
            {"blocks", blocks},
            {"m2", net.m2},
            {"w0_checksum", w0_checksum(net)}};
}

MuNet net_from_json(const json& j) {
    MuNet net;
    try {
        net.W0 = matrix_from_json(j.at("W0"), "W0");
        net.b0 = vector_from_json(j.at("b0"), "b0");
        net.W1 = matrix_from_json(j.at("W1"), "W1");
        net.m2 = j.at("m2").get<Index>();
        for (const auto& b : j.at("blocks")) net.blocks.emplace_back(b.get<std::vector<Index>>());
        if (net.b0.size() != net.hidden() || net.W1.rows() != net.m2 || net.W1.cols() != net.hidden() ||
            net.hidden() != net.regions() * net.m2)
            throw ParseError("mu net: inconsistent layer shapes");
        if (j.at("w0_checksum").get<std::string>() != w0_checksum(net))
            throw ValidationError("mu net: frozen layer checksum mismatch");
    } catch (const json::exception& e) {
        throw ParseError(std::string("mu net: ") + e.what());
    }
    return net;
}

json model_to_json(const PsnnModel& model) {
    return {{"schema_version", kSchemaVersion},
            {"kind", "mpqp.psnn"},
            {"fingerprint", model.fingerprint()},
            {"problem", problem_to_json(model.problem())},
            {"clamp", model.clamp},
            {"net", net_to_json(model.net())},
            {"g_weights", matrix_to_json(model.g_weights())},
            {"training", model.training}};
}

PsnnModel model_from_json(const json& j) {
    try {
        if (j.at("kind").get<std::string>() != "mpqp.psnn") throw ParseError("model: unexpected document kind");
        const QpProblem problem = problem_from_json(j.at("problem"));
        if (mpqp::fingerprint(problem) != j.at("fingerprint").get<std::string>())
            throw FingerprintMismatch("model: embedded problem does not match its fingerprint");
        PsnnModel model(net_from_json(j.at("net")), problem);
        model.clamp = j.value("clamp", true);
        model.training = j.value("training", json::object());
        return model;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

}  // namespace mpqp
