#include "aloe/mlp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aloe {

namespace {

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2)); }

double gelu_grad(double z) {
  const double cdf = 0.5 * (1.0 + std::erf(z / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + z * pdf;
}

Matrix activate(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::Identity: return z;
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::ReLU: return z.cwiseMax(0.0);
    case Activation::GELU: return z.unaryExpr([](double v) { return gelu(v); });
  }
  return z;
}

Matrix activation_grad(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::Identity: return Matrix::Ones(z.rows(), z.cols());
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::GELU: return z.unaryExpr([](double v) { return gelu_grad(v); });
  }
  return z;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::GELU: return "gelu";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::ReLU;
  if (name == "gelu") return Activation::GELU;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Mlp::Mlp(std::vector<int> widths, Activation hidden, Rng& rng)
    : widths_(std::move(widths)), hidden_(hidden) {
  compute_offsets();
  for (int l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    auto w = weight(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = init(rng);
    auto b = bias(l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = init(rng);
  }
}

Mlp::Mlp(std::vector<int> widths, Activation hidden, Vector params)
    : widths_(std::move(widths)), hidden_(hidden) {
  compute_offsets();
  if (params.size() != params_.size()) throw std::invalid_argument("Mlp: parameter count does not match widths");
  params_ = std::move(params);
}

void Mlp::compute_offsets() {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (int w : widths_) {
    if (w < 1) throw std::invalid_argument("Mlp: layer widths must be positive");
  }
  weight_offset_.clear();
  bias_offset_.clear();
  Eigen::Index offset = 0;
  for (int l = 0; l < num_layers(); ++l) {
    weight_offset_.push_back(offset);
    offset += static_cast<Eigen::Index>(widths_[l + 1]) * widths_[l];
    bias_offset_.push_back(offset);
    offset += widths_[l + 1];
  }
  params_ = Vector::Zero(offset);
}

Eigen::Map<const Matrix> Mlp::weight(int l) const {
  return {params_.data() + weight_offset_[l], widths_[l + 1], widths_[l]};
}
Eigen::Map<const Vector> Mlp::bias(int l) const {
  return {params_.data() + bias_offset_[l], widths_[l + 1]};
}
Eigen::Map<Matrix> Mlp::weight(int l) {
  return {params_.data() + weight_offset_[l], widths_[l + 1], widths_[l]};
}
Eigen::Map<Vector> Mlp::bias(int l) { return {params_.data() + bias_offset_[l], widths_[l + 1]}; }

Matrix Mlp::forward(const Matrix& x) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  Matrix h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    h = l + 1 < num_layers() ? activate(z, hidden_) : std::move(z);
  }
  return h;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  tape.inputs.assign(num_layers(), Matrix());
  tape.pre.assign(num_layers(), Matrix());
  Matrix h = x;
  for (int l = 0; l < num_layers(); ++l) {
    tape.inputs[l] = h;
    Matrix z = weight(l) * h;
    z.colwise() += bias(l);
    h = l + 1 < num_layers() ? activate(z, hidden_) : z;
    tape.pre[l] = std::move(z);
  }
  return h;
}

Vector Mlp::forward_one(const Vector& x) const { return forward(Matrix(x)).col(0); }

Matrix Mlp::backward(const Tape& tape, const Matrix& upstream, Vector& grads) const {
  if (grads.size() != params_.size()) grads = Vector::Zero(params_.size());
  if (upstream.rows() != output_dim()) throw std::invalid_argument("Mlp::backward: upstream dimension mismatch");
  Matrix g = upstream;
  for (int l = num_layers() - 1; l >= 0; --l) {
    if (l + 1 < num_layers()) g = g.cwiseProduct(activation_grad(tape.pre[l], hidden_));
    Eigen::Map<Matrix> gw(grads.data() + weight_offset_[l], widths_[l + 1], widths_[l]);
    Eigen::Map<Vector> gb(grads.data() + bias_offset_[l], widths_[l + 1]);
    gw.noalias() += g * tape.inputs[l].transpose();
    gb += g.rowwise().sum();
    g = weight(l).transpose() * g;
  }
  return g;
}

}  // namespace aloe
