#pragma once

// Fully connected networks with explicit reverse-mode gradients.
//
// All parameters live in one flat vector (per layer: weight matrix in
// column-major order, then bias), so optimizers, Polyak averaging and
// checkpoints operate on plain vectors. Inputs are batched column-wise.

#include "aloe/core.hpp"

#include <string>
#include <vector>

namespace aloe {

enum class Activation { Identity, Tanh, ReLU, GELU };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

class Mlp {
 public:
  /// Intermediate values of a forward pass, consumed by backward().
  struct Tape {
    std::vector<Matrix> inputs;  // input of each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  /// `widths` lists input, hidden and output sizes. Hidden layers use
  /// `hidden`; the output layer is linear.
  Mlp(std::vector<int> widths, Activation hidden, Rng& rng);
  Mlp(std::vector<int> widths, Activation hidden, Vector params);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int num_layers() const { return static_cast<int>(widths_.size()) - 1; }
  const std::vector<int>& widths() const { return widths_; }
  Activation activation() const { return hidden_; }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  std::size_t num_params() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::Map<const Matrix> weight(int layer) const;
  Eigen::Map<const Vector> bias(int layer) const;
  Eigen::Map<Matrix> weight(int layer);
  Eigen::Map<Vector> bias(int layer);

  Matrix forward(const Matrix& x) const;
  Matrix forward(const Matrix& x, Tape& tape) const;
  Vector forward_one(const Vector& x) const;

  /// Adds d(sum(upstream .* output))/d(params) into `grads` and returns the
  /// gradient with respect to the input batch.
  Matrix backward(const Tape& tape, const Matrix& upstream, Vector& grads) const;

  bool finite() const { return params_.allFinite(); }

 private:
  void compute_offsets();

  std::vector<int> widths_;
  Activation hidden_ = Activation::ReLU;
  Vector params_;
  std::vector<Eigen::Index> weight_offset_;
  std::vector<Eigen::Index> bias_offset_;
};

}  // namespace aloe
