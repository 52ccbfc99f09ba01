#include <doctest.h>

#include "fixtures.hpp"
#include "mpqp/dcopf.hpp"
#include "mpqp/discovery.hpp"
#include "mpqp/errors.hpp"
#include "mpqp/kkt.hpp"
#include "mpqp/psnn.hpp"
#include "mpqp/qp_core.hpp"

#include <cstring>
#include <limits>

using namespace mpqp;
using mpqp::test::tiny;

namespace {

RegionAtlas tiny_atlas() {
    DiscoverOptions o;
    o.alpha = 0.01;
    return discover(tiny(), VectorXd::Zero(1), 0, 1.1, o);
}

const RegionAtlas& six_bus_atlas() {
    static const RegionAtlas atlas = [] {
        const GridCase c = load_case("case6");
        return discover(build_qp(c), VectorXd::Constant(3, 0.01), 0, c.total_capacity());
    }();
    return atlas;
}

double max_rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST_CASE("frozen layer layout on TINY") {
    const MuNet net = build_mu_net(tiny_atlas(), 3);
    REQUIRE(net.hidden() == 4);
    REQUIRE(net.inputs() == 1);
    CHECK(net.W0(0, 0) == 0.0);
    CHECK(net.W0(1, 0) == 0.0);
    CHECK(std::abs(net.W0(2, 0) - 2.0) < 1e-12);
    CHECK(net.W0(3, 0) == 0.0);
    CHECK(net.regions() == 2);
    CHECK(net.blocks[1] == ActiveSet{0});
}

TEST_CASE("analytic init reproduces region duals") {
    const MuNet net = build_mu_net(tiny_atlas(), 0, true);
    const VectorXd hi = mu_forward(net, VectorXd(VectorXd::Constant(1, 0.9)));
    CHECK(std::abs(hi[0] - 0.6) < 1e-12);
    CHECK(hi[1] == 0.0);
    const VectorXd lo = mu_forward(net, VectorXd(VectorXd::Constant(1, 0.3)));
    CHECK(lo[0] == 0.0);
    CHECK(lo[1] == 0.0);
}

TEST_CASE("gradient matches finite differences") {
    const RegionAtlas& a = six_bus_atlas();
    MuNet net = build_mu_net(a, 11);
    const LabeledDataset d = populate(a, 8, 5);
    const MuGradient g = mu_loss_gradient(net, d.inputs, d.targets);
    const double h = 1e-6;
    auto loss = [&] { return mu_loss_gradient(net, d.inputs, d.targets).loss; };
    for (Index i = 0; i < net.b0.size(); ++i) {
        const double keep = net.b0[i];
        net.b0[i] = keep + h;
        const double up = loss();
        net.b0[i] = keep - h;
        const double dn = loss();
        net.b0[i] = keep;
        CHECK(max_rel_diff((up - dn) / (2 * h), g.b0[i]) <= 1e-4);
    }
    for (Index r = 0; r < net.W1.rows(); ++r)
        for (Index c = 0; c < net.W1.cols(); ++c) {
            const double keep = net.W1(r, c);
            net.W1(r, c) = keep + h;
            const double up = loss();
            net.W1(r, c) = keep - h;
            const double dn = loss();
            net.W1(r, c) = keep;
            CHECK(max_rel_diff((up - dn) / (2 * h), g.W1(r, c)) <= 1e-4);
        }
}

TEST_CASE("training leaves the frozen layer untouched") {
    const RegionAtlas& a = six_bus_atlas();
    MuNet net = build_mu_net(a, 2);
    const MatrixXd w0 = net.W0;
    const std::string sum = w0_checksum(net);
    const LabeledDataset d = populate(a, 20, 9);
    TrainConfig cfg;
    cfg.max_epochs = 200;
    cfg.batch_size = 16;
    cfg.seed = 4;
    const TrainHistory h = train(net, d, {}, cfg);
    CHECK(h.epochs == 200);
    CHECK(w0_checksum(net) == sum);
    CHECK(std::memcmp(w0.data(), net.W0.data(), sizeof(double) * static_cast<std::size_t>(w0.size())) == 0);
    CHECK(h.train_mse.back() < h.train_mse.front());
}

TEST_CASE("zero targets with zero output layer stop immediately") {
    MuNet net = build_mu_net(tiny_atlas(), 1);
    net.W1.setZero();
    LabeledDataset d{MatrixXd::Constant(5, 1, 0.7), MatrixXd::Zero(5, 2), std::vector<Index>(5, -1)};
    const TrainHistory h = train(net, d, {}, TrainConfig{});
    CHECK(h.converged);
    CHECK(h.epochs == 0);
    CHECK(h.train_mse.size() == 1);
}

TEST_CASE("non-finite targets raise NonFiniteLoss") {
    MuNet net = build_mu_net(tiny_atlas(), 2);
    LabeledDataset d{MatrixXd::Constant(4, 1, 0.9), MatrixXd::Zero(4, 2), std::vector<Index>(4, -1)};
    d.targets(2, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(net, d, {}, TrainConfig{}), NonFiniteLoss);
}

TEST_CASE("TINY training at default settings reaches the target loss") {
    const RegionAtlas a = tiny_atlas();
    MuNet net = build_mu_net(a, 0);
    const LabeledDataset d = populate(a, 1000, 1);
    const LabeledDataset v = populate(a, 200, 2);
    const TrainHistory h = train(net, d, v, TrainConfig{});
    CHECK(h.converged);
    CHECK(h.epochs <= 50000);
    CHECK(mu_mse(net, d) < 1e-10);
    CHECK(mu_mse(net, v) < 1e-10);
    MESSAGE("TINY converged after " << h.epochs << " epochs");
}

TEST_CASE("output layer least squares") {
    const RegionAtlas a = tiny_atlas();
    const LabeledDataset d = populate(a, 200, 3);
    CHECK(mu_mse(build_mu_net(a, 0, true), d) < 1e-24);
    MuNet fitted = build_mu_net(a, 0, true);
    fitted.W1.setRandom();
    fit_output_layer(fitted, d);
    CHECK(mu_mse(fitted, d) < 1e-24);

    const RegionAtlas& six = six_bus_atlas();
    const LabeledDataset d6 = populate(six, 50, 3);
    CHECK(mu_mse(init_mu_net(six, d6, 0, InitMode::WarmStart), populate(six, 50, 4)) < 1e-20);
    CHECK(init_mode_from_string(to_string(InitMode::WarmStart)) == InitMode::WarmStart);
    CHECK_THROWS_AS(init_mode_from_string("zeros"), ValidationError);
    MuNet net = build_mu_net(six, 5);
    const double before = mu_mse(net, d6);
    fit_output_layer(net, d6);
    CHECK(mu_mse(net, d6) < before);
}

TEST_CASE("model predictions are KKT points and batch equals single") {
    const RegionAtlas& a = six_bus_atlas();
    const QpProblem& p = a.problem;
    const PsnnModel model(build_mu_net(a, 0, true), p);

    const MatrixXd j = assemble_kkt(p);
    CHECK((model.g_weights() * j - MatrixXd::Identity(j.rows(), j.cols())).cwiseAbs().maxCoeff() < 1e-10);

    const LabeledDataset d = populate(a, 30, 8);
    const BatchSolution b = model.predict_batch(p, d.inputs);
    for (Index i = 0; i < d.rows(); ++i) {
        const ParamPoint pt = ParamPoint::from_varying(p, VectorXd(d.inputs.row(i).transpose()));
        const FullSolution s = model.predict(p, pt);
        CHECK(std::memcmp(s.x.data(), b.x.row(i).eval().data(), sizeof(double) * static_cast<std::size_t>(s.x.size())) == 0);
        CHECK(std::memcmp(s.mu.data(), b.mu.row(i).eval().data(), sizeof(double) * static_cast<std::size_t>(s.mu.size())) == 0);
        CHECK(std::memcmp(s.lambda.data(), b.lambda.row(i).eval().data(),
                          sizeof(double) * static_cast<std::size_t>(s.lambda.size())) == 0);
        // whatever μ the network emits, g(μ) makes x and λ stationary and feasible for the equalities
        const KktReport r = kkt_report(p, pt, s);
        CHECK(r.kkt1_x < 1e-20);
        CHECK(r.kkt1_delta < 1e-20);
        CHECK(r.kkt2_eq < 1e-20);
        CHECK(r.kkt3 == 0.0);
    }
}

TEST_CASE("model JSON round trip") {
    const RegionAtlas& a = six_bus_atlas();
    PsnnModel model(build_mu_net(a, 7), a.problem);
    model.training = {{"epochs", 3}};
    const PsnnModel back = model_from_json(json::parse(model_to_json(model).dump()));
    CHECK(back.fingerprint() == model.fingerprint());
    CHECK(back.net().W0 == model.net().W0);
    CHECK(back.net().W1 == model.net().W1);
    CHECK(back.net().b0 == model.net().b0);
    CHECK(back.training["epochs"] == 3);
    const MatrixXd th = populate(a, 5, 1).inputs;
    CHECK(back.predict_batch(a.problem, th).x == model.predict_batch(a.problem, th).x);

    json tampered = model_to_json(model);
    tampered["net"]["W0"]["data"][0] = 123.0;
    CHECK_THROWS_AS(model_from_json(tampered), ValidationError);
    CHECK_THROWS_AS(model.check(tiny()), FingerprintMismatch);
}

TEST_CASE("trained TINY model end to end") {
    const RegionAtlas a = tiny_atlas();
    const QpProblem& p = a.problem;
    MuNet net = build_mu_net(a, 0);
    const PsnnModel untrained(net, p);
    train(net, populate(a, 1000, 1), populate(a, 200, 2), TrainConfig{});
    const PsnnModel model(net, p);

    const ParamPoint one = ParamPoint::from_varying(p, VectorXd(VectorXd::Constant(1, 1.0)));
    const FullSolution s = model.predict(p, one);
    CHECK(std::abs(s.x[0] - 0.3) < 1e-5);
    CHECK(std::abs(s.x[1] - 0.7) < 1e-5);
    CHECK(kkt_report(p, one, s).max() < 1e-9);

    const ParamPoint inner = ParamPoint::from_varying(p, VectorXd(VectorXd::Constant(1, 0.4)));
    const FullSolution t = model.predict(p, inner);
    CHECK(std::abs(t.mu[0]) < 1e-5);
    CHECK(std::abs(t.x[0] - 0.2) < 1e-5);
    CHECK(std::abs(t.x[1] - 0.2) < 1e-5);

    CHECK(kkt_report(p, one, untrained.predict(p, one)).max() > 1e-6);
}
