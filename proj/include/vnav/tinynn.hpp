#pragma once

#include "vnav/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

/// Small fixed-topology neural networks: dense and strided "valid" convolution
/// layers, ReLU, Adam/SGD and TD-style losses. A batch is a matrix whose
/// columns are flattened samples (channel-major, then row-major).
namespace vnav::nn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor.
template <typename Scalar>
struct Tensor {
  std::vector<Index> shape;
  Vector<Scalar> values;

  Tensor() = default;
  explicit Tensor(std::vector<Index> s) : shape(std::move(s)), values(Vector<Scalar>::Zero(count(shape))) {}
  Tensor(std::vector<Index> s, Vector<Scalar> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != count(shape)) throw ShapeError("tensor value count does not match its shape");
  }

  Index size() const { return values.size(); }

  static Index count(const std::vector<Index>& s) {
    Index n = 1;
    for (Index d : s) n *= d;
    return n;
  }
};

struct Shape3 {
  Index channels = 1;
  Index height = 1;
  Index width = 1;
  Index size() const { return channels * height * width; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
class Dense {
 public:
  Dense(Index in, Index out)
      : weight(Matrix<Scalar>::Zero(out, in)),
        bias(Matrix<Scalar>::Zero(out, 1)),
        grad_weight(Matrix<Scalar>::Zero(out, in)),
        grad_bias(Matrix<Scalar>::Zero(out, 1)) {}

  Index in_size() const { return weight.cols(); }
  Index out_size() const { return weight.rows(); }

  Matrix<Scalar> apply(const Matrix<Scalar>& x) const {
    Matrix<Scalar> y = weight * x;
    y.colwise() += bias.col(0);
    return y;
  }
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    input_ = x;
    return apply(x);
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& g, bool need_input_grad) {
    grad_weight.noalias() += g * input_.transpose();
    grad_bias += g.rowwise().sum();
    if (!need_input_grad) return {};
    return weight.transpose() * g;
  }

  Matrix<Scalar> weight, bias, grad_weight, grad_bias;

 private:
  Matrix<Scalar> input_;
};

/// Valid (unpadded) strided 2-D convolution via im2col.
template <typename Scalar>
class Conv2D {
 public:
  Conv2D(Shape3 in, Index out_channels, Index kernel, Index stride)
      : in_shape_(in), kernel_(kernel), stride_(stride) {
    if (kernel < 1 || stride < 1) throw ShapeError("kernel and stride must be positive");
    if (in.height < kernel || in.width < kernel) throw ShapeError("convolution kernel exceeds its input");
    out_shape_ = {out_channels, (in.height - kernel) / stride + 1, (in.width - kernel) / stride + 1};
    const Index patch = in.channels * kernel * kernel;
    weight = Matrix<Scalar>::Zero(out_channels, patch);
    bias = Matrix<Scalar>::Zero(out_channels, 1);
    grad_weight = weight;
    grad_bias = bias;
  }

  const Shape3& in_shape() const { return in_shape_; }
  const Shape3& out_shape() const { return out_shape_; }
  Index kernel() const { return kernel_; }
  Index stride() const { return stride_; }

  Matrix<Scalar> apply(const Matrix<Scalar>& x) const { return convolve(im2col(x), x.cols()); }
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    patches_ = im2col(x);
    return convolve(patches_, x.cols());
  }

  Matrix<Scalar> backward(const Matrix<Scalar>& g, bool need_input_grad) {
    const Index batch = g.cols();
    const Index pixels = out_shape_.height * out_shape_.width;
    const Index oc = out_shape_.channels;
    Matrix<Scalar> grad_rows(oc, batch * pixels);
    for (Index b = 0; b < batch; ++b)
      grad_rows.middleCols(b * pixels, pixels) =
          Eigen::Map<const Matrix<Scalar>>(g.col(b).data(), pixels, oc).transpose();
    grad_weight.noalias() += grad_rows * patches_.transpose();
    grad_bias += grad_rows.rowwise().sum();
    if (!need_input_grad) return {};

    const Matrix<Scalar> grad_patches = weight.transpose() * grad_rows;
    Matrix<Scalar> grad_in = Matrix<Scalar>::Zero(in_shape_.size(), batch);
    const Index hw = in_shape_.height * in_shape_.width;
    for (Index b = 0; b < batch; ++b)
      for (Index oy = 0; oy < out_shape_.height; ++oy)
        for (Index ox = 0; ox < out_shape_.width; ++ox) {
          const Index col = b * pixels + oy * out_shape_.width + ox;
          for (Index c = 0; c < in_shape_.channels; ++c)
            for (Index ky = 0; ky < kernel_; ++ky)
              for (Index kx = 0; kx < kernel_; ++kx)
                grad_in(c * hw + (oy * stride_ + ky) * in_shape_.width + ox * stride_ + kx, b) +=
                    grad_patches((c * kernel_ + ky) * kernel_ + kx, col);
        }
    return grad_in;
  }

  Matrix<Scalar> weight, bias, grad_weight, grad_bias;

 private:
  Matrix<Scalar> im2col(const Matrix<Scalar>& x) const {
    const Index batch = x.cols();
    const Index pixels = out_shape_.height * out_shape_.width;
    const Index hw = in_shape_.height * in_shape_.width;
    Matrix<Scalar> p(in_shape_.channels * kernel_ * kernel_, batch * pixels);
    for (Index b = 0; b < batch; ++b) {
      const Scalar* src = x.col(b).data();
      for (Index oy = 0; oy < out_shape_.height; ++oy)
        for (Index ox = 0; ox < out_shape_.width; ++ox) {
          Scalar* dst = p.col(b * pixels + oy * out_shape_.width + ox).data();
          for (Index c = 0; c < in_shape_.channels; ++c)
            for (Index ky = 0; ky < kernel_; ++ky) {
              const Scalar* row = src + c * hw + (oy * stride_ + ky) * in_shape_.width + ox * stride_;
              for (Index kx = 0; kx < kernel_; ++kx) *dst++ = row[kx];
            }
        }
    }
    return p;
  }

  Matrix<Scalar> convolve(const Matrix<Scalar>& patches, Index batch) const {
    const Index pixels = out_shape_.height * out_shape_.width;
    Matrix<Scalar> rows = weight * patches;
    rows.colwise() += bias.col(0);
    Matrix<Scalar> out(out_shape_.size(), batch);
    for (Index b = 0; b < batch; ++b)
      Eigen::Map<Matrix<Scalar>>(out.col(b).data(), pixels, out_shape_.channels) =
          rows.middleCols(b * pixels, pixels).transpose();
    return out;
  }

  Shape3 in_shape_, out_shape_;
  Index kernel_, stride_;
  Matrix<Scalar> patches_;
};

template <typename Scalar>
class ReLU {
 public:
  Matrix<Scalar> apply(const Matrix<Scalar>& x) const { return x.cwiseMax(Scalar(0)); }
  Matrix<Scalar> forward(const Matrix<Scalar>& x) {
    mask_ = (x.array() > Scalar(0)).template cast<Scalar>().matrix();
    return apply(x);
  }
  Matrix<Scalar> backward(const Matrix<Scalar>& g, bool) { return g.cwiseProduct(mask_); }

 private:
  Matrix<Scalar> mask_;
};

/// Batches are already flat; Flatten only changes how shapes compose.
template <typename Scalar>
class Flatten {
 public:
  Matrix<Scalar> apply(const Matrix<Scalar>& x) const { return x; }
  Matrix<Scalar> forward(const Matrix<Scalar>& x) { return x; }
  Matrix<Scalar> backward(const Matrix<Scalar>& g, bool) { return g; }
};

/// Identity activation for the Q-value head.
template <typename Scalar>
class Linear {
 public:
  Matrix<Scalar> apply(const Matrix<Scalar>& x) const { return x; }
  Matrix<Scalar> forward(const Matrix<Scalar>& x) { return x; }
  Matrix<Scalar> backward(const Matrix<Scalar>& g, bool) { return g; }
};

template <typename Scalar>
using Layer = std::variant<Dense<Scalar>, Conv2D<Scalar>, ReLU<Scalar>, Flatten<Scalar>, Linear<Scalar>>;

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar>* value;
  Matrix<Scalar>* grad;
};

template <typename Scalar>
struct ConstParameter {
  std::string name;
  const Matrix<Scalar>* value;
};

// ---------------------------------------------------------------------------
// Network

/// Parses an architecture descriptor such as
///   "in=3x33x33 conv(16,3,2) relu conv(32,3,2) relu flatten dense(128) relu dense(8) linear"
///   "in=4 dense(64) relu dense(64) relu dense(8) linear"
/// Weights feeding a ReLU are He-uniform, all others Xavier-uniform; biases start at zero.
template <typename Scalar>
class Network {
 public:
  Network() = default;
  Network(std::string_view descriptor, std::uint64_t seed);

  const std::string& descriptor() const { return descriptor_; }
  Index input_size() const { return input_shape_.size(); }
  const Shape3& input_shape() const { return input_shape_; }
  Index output_size() const { return output_size_; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer<Scalar>& layer(std::size_t i) const { return layers_.at(i); }

  /// Training pass; caches what backward() needs.
  Matrix<Scalar> forward(const Matrix<Scalar>& batch) {
    check_input(batch);
    Matrix<Scalar> x = batch;
    for (auto& layer : layers_) x = std::visit([&](auto& l) { return l.forward(x); }, layer);
    cached_ = true;
    return x;
  }

  /// Inference pass; no caches, no mutation.
  Matrix<Scalar> predict(const Matrix<Scalar>& batch) const {
    check_input(batch);
    Matrix<Scalar> x = batch;
    for (const auto& layer : layers_) x = std::visit([&](const auto& l) { return l.apply(x); }, layer);
    return x;
  }

  /// Accumulates parameter gradients of sum(loss_grad .* output). Throws
  /// std::logic_error without a preceding forward().
  void backward(const Matrix<Scalar>& loss_grad) {
    if (!cached_) throw std::logic_error("backward() requires a preceding forward()");
    if (loss_grad.rows() != output_size_) throw ShapeError("loss gradient does not match the network output");
    Matrix<Scalar> g = loss_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const bool need_input_grad = i > 0;
      g = std::visit([&](auto& l) { return l.backward(g, need_input_grad); }, layers_[i]);
    }
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->setZero();
  }

  std::vector<Parameter<Scalar>> parameters();
  std::vector<ConstParameter<Scalar>> parameters() const;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value->size());
    return n;
  }

 private:
  void check_input(const Matrix<Scalar>& batch) const {
    if (batch.rows() != input_size())
      throw ShapeError("input has " + std::to_string(batch.rows()) + " features, network expects " +
                       std::to_string(input_size()));
  }

  std::string descriptor_;
  Shape3 input_shape_;
  Index output_size_ = 0;
  std::vector<Layer<Scalar>> layers_;
  bool cached_ = false;
};

template <typename Scalar>
Tensor<Scalar> forward(Network<Scalar>& net, const Tensor<Scalar>& input) {
  if (input.size() != net.input_size()) throw ShapeError("input tensor does not match the network");
  Matrix<Scalar> out = net.forward(input.values);
  return Tensor<Scalar>({net.output_size()}, out.col(0));
}

template <typename Scalar>
void backward(Network<Scalar>& net, const Tensor<Scalar>& loss_grad) {
  net.backward(loss_grad.values);
}

/// Copies parameter values; architectures must match exactly.
template <typename Scalar>
void copy_parameters(const Network<Scalar>& src, Network<Scalar>& dst) {
  if (src.descriptor() != dst.descriptor())
    throw ArchitectureError("cannot copy parameters between '" + src.descriptor() + "' and '" +
                            dst.descriptor() + "'");
  auto from = src.parameters();
  auto to = dst.parameters();
  for (std::size_t i = 0; i < from.size(); ++i) *to[i].value = *from[i].value;
}

// ---------------------------------------------------------------------------
// Optimisation

enum class OptimizerKind { Adam, Sgd };

template <typename Scalar>
struct OptimizerOptions {
  OptimizerKind kind = OptimizerKind::Adam;
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

/// Applies the accumulated gradients of a network. Adam moments are keyed by
/// parameter position and sized on first use.
template <typename Scalar>
class Optimizer {
 public:
  explicit Optimizer(OptimizerOptions<Scalar> options = {}) : options_(options) {}

  const OptimizerOptions<Scalar>& options() const { return options_; }
  long steps() const { return steps_; }

  void step(Network<Scalar>& net) {
    auto params = net.parameters();
    ++steps_;
    if (options_.kind == OptimizerKind::Sgd) {
      for (auto& p : params) *p.value -= options_.learning_rate * *p.grad;
      return;
    }
    if (first_moment_.size() != params.size()) {
      first_moment_.clear();
      second_moment_.clear();
      for (auto& p : params) {
        first_moment_.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
        second_moment_.push_back(Matrix<Scalar>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    const Scalar b1 = options_.beta1, b2 = options_.beta2;
    const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(steps_));
    const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& m = first_moment_[i];
      auto& v = second_moment_[i];
      const auto& g = *params[i].grad;
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
      params[i].value->array() -=
          options_.learning_rate * (m.array() / correction1) /
          ((v.array() / correction2).sqrt() + options_.epsilon);
    }
  }

 private:
  OptimizerOptions<Scalar> options_;
  long steps_ = 0;
  std::vector<Matrix<Scalar>> first_moment_, second_moment_;
};

template <typename Scalar>
void optimizer_step(Network<Scalar>& net, Optimizer<Scalar>& optimizer) {
  optimizer.step(net);
}

template <typename Scalar>
struct LossResult {
  Scalar value = Scalar(0);
  /// d(value)/d(pred), same shape as pred.
  Matrix<Scalar> gradient;
};

/// Mean elementwise Huber loss. The per-element gradient is the error clipped
/// to [-delta, delta], divided by the element count.
template <typename DerivedP, typename DerivedT>
LossResult<typename DerivedP::Scalar> huber_loss(const Eigen::MatrixBase<DerivedP>& pred,
                                                 const Eigen::MatrixBase<DerivedT>& target,
                                                 typename DerivedP::Scalar delta) {
  using Scalar = typename DerivedP::Scalar;
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("huber_loss: prediction and target shapes differ");
  const Matrix<Scalar> err = pred - target;
  const auto abs = err.array().abs();
  const Scalar n = static_cast<Scalar>(err.size());
  const auto per = (abs <= delta).select(Scalar(0.5) * err.array().square(), delta * (abs - Scalar(0.5) * delta));
  LossResult<Scalar> out;
  out.value = err.size() == 0 ? Scalar(0) : per.sum() / n;
  out.gradient = (err.array().max(-delta).min(delta) / n).matrix();
  return out;
}

/// Mean squared error.
template <typename DerivedP, typename DerivedT>
LossResult<typename DerivedP::Scalar> mse_loss(const Eigen::MatrixBase<DerivedP>& pred,
                                               const Eigen::MatrixBase<DerivedT>& target) {
  using Scalar = typename DerivedP::Scalar;
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError("mse_loss: prediction and target shapes differ");
  const Matrix<Scalar> err = pred - target;
  const Scalar n = static_cast<Scalar>(err.size());
  LossResult<Scalar> out;
  out.value = err.size() == 0 ? Scalar(0) : err.squaredNorm() / n;
  out.gradient = Scalar(2) * err / n;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "VNNN", version byte, length-prefixed UTF-8 descriptor, u32
// parameter count, then per parameter: length-prefixed name, u32 rank, u32
// dims, little-endian f64 values in row-major order.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Network<double>& net);
void write_checkpoint(std::ostream& out, const Network<double>& net);
Network<double> load_checkpoint(const std::filesystem::path& path);
Network<double> read_checkpoint(std::istream& in);
/// Also rejects a checkpoint whose descriptor differs from `expected_descriptor`.
Network<double> load_checkpoint(const std::filesystem::path& path, std::string_view expected_descriptor);

/// FNV-1a over the descriptor and every parameter value.
std::uint64_t parameter_hash(const Network<double>& net);

extern template class Network<double>;
extern template class Network<float>;

}  // namespace vnav::nn
