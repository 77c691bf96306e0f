#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bounce/mixture.hpp"
#include "bounce/rng.hpp"

namespace bounce::mdn {

struct MdnConfig {
  int n_components = 6;
  std::vector<int> hidden_sizes{64, 64};
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int epochs = 500;
  int batch_size = 128;
  std::uint64_t seed = 0;
  double variance_floor = 1e-6;
};

/// Feed-forward mixture density network: tanh MLP whose head emits K mixture
/// logits, K*D component means and K*D log-variances. Input and target
/// standardization statistics are baked into the model; forward evaluation
/// returns mixtures in original target units.
struct MdnModel {
  int input_dim = 0;
  int target_dim = 0;
  int n_components = 0;
  std::vector<Eigen::MatrixXd> weights;  // layer l: (out_l x in_l)
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd x_mean, x_std;
  Eigen::VectorXd t_mean, t_std;
  Eigen::VectorXd x_min, x_max;  // training feature range, for extrapolation flags
  double variance_floor = 1e-6;

  int output_dim() const { return n_components * (1 + 2 * target_dim); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  bool in_training_range(const Eigen::VectorXd& x) const;
};

struct MdnGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

struct TrainingDivergedError : std::runtime_error {
  explicit TrainingDivergedError(int epoch_)
      : std::runtime_error("MDN training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch_)),
        epoch(epoch_) {}
  int epoch;
};

/// Evaluate the conditional mixture at one input (original target units).
MixtureOfGaussians mdn_forward(const MdnModel& model, const Eigen::VectorXd& x);

/// Mean negative log-likelihood of a batch, in original target units.
/// X is B x input_dim, T is B x target_dim. When grads is non-null it is
/// filled with the analytic gradient of the mean NLL.
double nll_loss(const MdnModel& model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& T,
                MdnGradients* grads = nullptr);

struct TrainResult {
  MdnModel model;
  std::vector<double> epoch_nll;  // full-dataset NLL; entry 0 is pre-training
};

/// Train by minibatch SGD with momentum. Throws TrainingDivergedError on
/// non-finite loss. Reproducible from config.seed.
TrainResult train_mdn(const Eigen::MatrixXd& X, const Eigen::MatrixXd& T,
                      const MdnConfig& config);

// Flat parameter views (tests, checkpoints).
Eigen::VectorXd flatten_params(const MdnModel& model);
void set_params(MdnModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const MdnGradients& grads);

// JSON checkpoint round trip.
std::string to_json(const MdnModel& model);
MdnModel mdn_from_json(const std::string& text);
void save_mdn(const MdnModel& model, const std::string& path);
MdnModel load_mdn(const std::string& path);

}  // namespace bounce::mdn
