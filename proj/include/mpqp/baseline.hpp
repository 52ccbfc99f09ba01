#pragma once

#include "mpqp/discovery.hpp"
#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"
#include "mpqp/psnn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mpqp {

/// Dense ReLU regression network θ → [x; λ; μ]. Inputs and outputs are
/// standardized with training-set statistics stored alongside the weights.
struct DnnModel {
    std::vector<MatrixXd> W;  // W[l] is out x in
    std::vector<VectorXd> b;
    VectorXd in_mean, in_scale, out_mean, out_scale;
    Index n = 0, m1 = 0, m2 = 0;
    std::string fingerprint;

    Index layers() const { return static_cast<Index>(W.size()); }
    Index inputs() const { return W.front().cols(); }
    Index outputs() const { return W.back().rows(); }
    std::vector<Index> sizes() const;
};

/// Layer sizes n_varying, hidden..., n + m1 + m2; uniform ±√(6/fan_in)
/// weights, zero biases, identity standardization.
DnnModel make_dnn(const QpProblem& problem, const std::vector<Index>& hidden, std::uint64_t seed);

struct DnnTrainConfig {
    std::vector<Index> hidden = {64, 64, 64};
    double learning_rate = 1e-3;
    Index max_epochs = 1000;
    Index batch_size = 128;
    Index patience = 50;  // epochs without a validation improvement
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct DnnHistory {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    Index best_epoch = 0;
    Index epochs = 0;
};

/// Oracle-labeled dataset: targets are [x; λ; μ]. Rows the oracle reports
/// infeasible are dropped; their count goes to `dropped` when given.
LabeledDataset solution_dataset(const QpProblem& problem, const MatrixXd& thetas, Index* dropped = nullptr);
std::vector<std::string> solution_target_names(const QpProblem& problem);

/// Raw (unstandardized) forward pass, N x outputs.
MatrixXd dnn_forward(const DnnModel& model, const MatrixXd& thetas);

/// MSE in standardized units and its gradient for every layer.
struct DnnGradient {
    std::vector<MatrixXd> W;
    std::vector<VectorXd> b;
    double loss = 0.0;
};
DnnGradient dnn_loss_gradient(const DnnModel& model, const MatrixXd& inputs, const MatrixXd& targets);

/// Fits standardization on `train`, then Adam on minibatches; keeps the
/// weights of the best validation epoch. Throws NonFiniteLoss.
DnnModel train_baseline(const QpProblem& problem, const LabeledDataset& train, const LabeledDataset& val,
                        const DnnTrainConfig& cfg, DnnHistory* history = nullptr);

FullSolution dnn_predict(const DnnModel& model, const QpProblem& problem, const ParamPoint& p);
BatchSolution dnn_predict_batch(const DnnModel& model, const QpProblem& problem, const MatrixXd& thetas);

json dnn_to_json(const DnnModel& model);
DnnModel dnn_from_json(const json& j);

}  // namespace mpqp
