#pragma once

// Small fully connected regressor trained by full-batch gradient descent
// with momentum on a mean-squared-error loss. Hidden layers use tanh; the
// output layer is linear. Samples are stored as columns.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "share/error.hpp"
#include "share/random.hpp"

namespace share {

enum class Activation { tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

/// tanh(x) = 1 - 2 / (exp(2x) + 1); Eigen vectorises exp but not tanh for doubles.
template <typename Derived>
Eigen::MatrixXd tanh_activation(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

struct TrainSettings {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int iterations = 5000;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<DenseLayer> layers, Activation activation)
      : layers_(std::move(layers)), activation_(activation) {
    check();
  }

  /// Weights and biases drawn uniformly from [-init_range, init_range].
  static Mlp random(const std::vector<int>& sizes, double init_range, std::uint64_t seed) {
    if (sizes.size() < 2) throw InvalidArgument("an MLP needs at least input and output sizes");
    for (int s : sizes)
      if (s < 1) throw InvalidArgument("layer sizes must be positive");
    Rng rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = rng.uniform(-init_range, init_range);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = rng.uniform(-init_range, init_range);
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers), Activation::tanh);
  }

  Eigen::Index input_size() const { return layers_.front().weights.cols(); }
  Eigen::Index output_size() const { return layers_.back().weights.rows(); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  Activation activation() const noexcept { return activation_; }

  std::vector<int> sizes() const {
    std::vector<int> s{static_cast<int>(input_size())};
    for (const auto& l : layers_) s.push_back(static_cast<int>(l.weights.rows()));
    return s;
  }

  /// Outputs for a batch of column inputs (in x n) -> (out x n).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const {
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = (layers_[l].weights * a).colwise() + layers_[l].bias;
      a = (l + 1 < layers_.size()) ? tanh_activation(z) : std::move(z);
    }
    return a;
  }

  double predict_scalar(const Eigen::VectorXd& input) const { return forward(input)(0, 0); }

  /// Mean over samples and outputs of the squared residual.
  double mse(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const {
    return (forward(inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
  }

  /// Runs the configured number of full-batch steps. Returns the loss of the
  /// final weights.
  double train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const TrainSettings& cfg) {
    if (inputs.rows() != input_size() || targets.rows() != output_size() || inputs.cols() != targets.cols())
      throw InvalidArgument("training data does not match the network shape");
    if (inputs.cols() == 0) throw InvalidArgument("no training samples");
    const std::size_t L = layers_.size();
    const double n = static_cast<double>(targets.size());

    std::vector<DenseLayer> velocity;
    for (const auto& l : layers_)
      velocity.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                          Eigen::VectorXd::Zero(l.bias.size())});
    std::vector<Eigen::MatrixXd> acts(L + 1);
    Eigen::MatrixXd delta;

    for (int it = 0; it < cfg.iterations; ++it) {
      acts[0] = inputs;
      for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (layers_[l].weights * acts[l]).colwise() + layers_[l].bias;
        acts[l + 1] = (l + 1 < L) ? tanh_activation(z) : std::move(z);
      }
      delta = (2.0 / n) * (acts[L] - targets);
      for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * acts[l].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (l > 0) {
          Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
          delta = back.array() * (1.0 - acts[l].array().square());
        }
        velocity[l].weights = cfg.momentum * velocity[l].weights - cfg.learning_rate * grad_w;
        velocity[l].bias = cfg.momentum * velocity[l].bias - cfg.learning_rate * grad_b;
        layers_[l].weights += velocity[l].weights;
        layers_[l].bias += velocity[l].bias;
      }
    }
    return mse(inputs, targets);
  }

 private:
  void check() const {
    if (layers_.empty()) throw InvalidArgument("an MLP needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weights.rows())
        throw InvalidArgument("bias size does not match layer " + std::to_string(l));
      if (l > 0 && layers_[l].weights.cols() != layers_[l - 1].weights.rows())
        throw InvalidArgument("layer " + std::to_string(l) + " input does not match previous output");
    }
  }

  std::vector<DenseLayer> layers_;
  Activation activation_ = Activation::tanh;
};

}  // namespace share
