#pragma once

#include "mpqp/discovery.hpp"
#include "mpqp/io.hpp"
#include "mpqp/problem.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mpqp {

/**
 * μ-network: μ̂ = W1 · ReLU(W0 θ + b0).
 *
 * W0 is fixed: block i (rows [i·m2, (i+1)·m2)) holds the slope rows of the
 * i-th distinct active set at their constraint positions and zeros for
 * constraints outside the set. Only b0 and W1 are trained.
 */
struct MuNet {
    MatrixXd W0;
    VectorXd b0;
    MatrixXd W1;
    std::vector<ActiveSet> blocks;
    Index m2 = 0;

    Index hidden() const { return W0.rows(); }
    Index inputs() const { return W0.cols(); }
    Index regions() const { return static_cast<Index>(blocks.size()); }
};

/// FNV-1a over the raw bytes of W0; detects any change to the frozen layer.
std::string w0_checksum(const MuNet& net);

/// b0, W1 uniform in ±1/√fan_in from `seed`. With `analytic_init`, b0 takes
/// the region intercepts and W1 sums each constraint's block entries.
MuNet build_mu_net(const RegionAtlas& atlas, std::uint64_t seed, bool analytic_init = false);

enum class InitMode {
    Random,    // b0, W1 uniform from the seed
    Analytic,  // intercept biases, indicator output weights
    /// Intercept biases, then the least-squares output layer on the training
    /// set. Random starts tend to stall where a hidden unit's kink sits away
    /// from the data; this start puts every kink on a region boundary.
    WarmStart,
};

InitMode init_mode_from_string(const std::string& s);
std::string to_string(InitMode m);

MuNet init_mu_net(const RegionAtlas& atlas, const LabeledDataset& train, std::uint64_t seed, InitMode mode);

/// Single-row forward pass.
VectorXd mu_forward(const MuNet& net, const VectorXd& theta);
/// Row-wise forward pass over an N x n_varying matrix; returns N x m2.
MatrixXd mu_forward(const MuNet& net, const MatrixXd& thetas);

/// Mean over all entries of the squared prediction error.
double mu_mse(const MuNet& net, const LabeledDataset& data);

/// Least-squares W1 for the current W0, b0 (minimum-norm solution).
void fit_output_layer(MuNet& net, const LabeledDataset& data);

enum class Optimizer { Adam, GradientDescent };

struct TrainConfig {
    double learning_rate = 1e-3;
    Index max_epochs = 50000;
    double tol = 1e-10;  // stop once validation and training MSE are both below
    Index batch_size = 0;  // 0 or >= N: full batch
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainHistory {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    Index epochs = 0;
    bool converged = false;
};

struct MuGradient {
    VectorXd b0;
    MatrixXd W1;
    double loss = 0.0;
};

/// Loss and analytic gradient with respect to the trainable parameters.
MuGradient mu_loss_gradient(const MuNet& net, const MatrixXd& inputs, const MatrixXd& targets);

/// Trains b0 and W1 until validation and training MSE are both < tol, or
/// max_epochs. An empty
/// validation set falls back to the training MSE. Throws NonFiniteLoss.
TrainHistory train(MuNet& net, const LabeledDataset& data, const LabeledDataset& val, const TrainConfig& cfg);

/// Batch of full solutions, one row per parameter point.
struct BatchSolution {
    MatrixXd x;
    MatrixXd lambda;
    MatrixXd mu;

    Index rows() const { return x.rows(); }
    FullSolution row(Index i) const;
};

class PsnnModel {
public:
    PsnnModel() = default;
    /// Stores J⁻¹ of the problem's equality KKT matrix next to the network.
    PsnnModel(MuNet net, const QpProblem& problem);

    const MuNet& net() const { return net_; }
    const MatrixXd& g_weights() const { return g_; }
    const std::string& fingerprint() const { return fingerprint_; }
    const QpProblem& problem() const { return problem_; }
    bool clamp = true;
    json training;  // free-form metadata

    /// Throws FingerprintMismatch when `problem` is not the one trained for.
    void check(const QpProblem& problem) const;

    FullSolution predict(const QpProblem& problem, const ParamPoint& p) const;
    BatchSolution predict_batch(const QpProblem& problem, const MatrixXd& thetas) const;

    /// Call after changing the network weights.
    void refresh();

private:
    void predict_row(const double* theta, double* hidden, double* mu, double* z) const;

    MuNet net_;
    QpProblem problem_;
    MatrixXd g_;
    std::string fingerprint_;
    Index n_ = 0, m1_ = 0;
    // Kernel copies: live W0 rows packed row-major, W1 row-major, the
    // affine maps column-major.
    std::vector<Index> live_;
    std::vector<double> w0_, w1_, z_theta_, z_mu_;
    std::vector<double> b0_, z0_, hidden_const_;
};

FullSolution predict_solution(const PsnnModel& model, const QpProblem& problem, const ParamPoint& p);
BatchSolution batch_predict(const PsnnModel& model, const QpProblem& problem, const MatrixXd& thetas);

json model_to_json(const PsnnModel& model);
/// The model document embeds its problem; verifies fingerprint and W0 checksum.
PsnnModel model_from_json(const json& j);

json net_to_json(const MuNet& net);
MuNet net_from_json(const json& j);

}  // namespace mpqp
