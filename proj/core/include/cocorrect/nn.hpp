#pragma once

// Minimal CPU convolutional classifier used as the backbone of both networks.
// Activations are row-major matrices with one sample per row, laid out as
// channels x height x width.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace cocorrect::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  [[nodiscard]] int size() const { return channels * height * width; }
  [[nodiscard]] int plane() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

class Layer {
 public:
  virtual ~Layer() = default;

  [[nodiscard]] virtual std::string_view name() const = 0;
  [[nodiscard]] virtual Shape input_shape() const = 0;
  [[nodiscard]] virtual Shape output_shape() const = 0;
  [[nodiscard]] virtual std::size_t param_count() const { return 0; }

  // Points the layer at its slice of the network's flat parameter and
  // gradient buffers.
  virtual void bind(float* /*params*/, float* /*grads*/) {}
  virtual void init(std::mt19937_64& /*rng*/) {}

  virtual void forward(const Matrix& x, Matrix& y) = 0;

  // Accumulates parameter gradients and writes dx when non-null. Only rows
  // listed in `active` carry nonzero dy; other rows are skipped and receive
  // zero dx.
  virtual void backward(const Matrix& x, const Matrix& y, const Matrix& dy,
                        Matrix* dx, std::span<const int> active) = 0;
};

// 2-D convolution, square kernel, stride 1, zero padding.
class Conv2d final : public Layer {
 public:
  Conv2d(Shape in, int out_channels, int kernel = 3, int pad = 1);

  std::string_view name() const override { return "conv2d"; }
  Shape input_shape() const override { return in_; }
  Shape output_shape() const override { return out_; }
  std::size_t param_count() const override;
  void bind(float* params, float* grads) override;
  void init(std::mt19937_64& rng) override;
  void forward(const Matrix& x, Matrix& y) override;
  void backward(const Matrix& x, const Matrix& y, const Matrix& dy, Matrix* dx,
                std::span<const int> active) override;

 private:
  void im2col(const float* image, float* col, int col_stride) const;
  void col2im(const float* col, int col_stride, float* image) const;
  [[nodiscard]] int chunk_size() const;

  Shape in_;
  Shape out_;
  int kernel_;
  int pad_;
  int patch_;  // in_.channels * kernel * kernel
  float* weight_ = nullptr;
  float* bias_ = nullptr;
  float* weight_grad_ = nullptr;
  float* bias_grad_ = nullptr;
  Matrix col_;
  Matrix buf_;
};

class Relu final : public Layer {
 public:
  explicit Relu(Shape in) : shape_(in) {}
  std::string_view name() const override { return "relu"; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  void forward(const Matrix& x, Matrix& y) override;
  void backward(const Matrix& x, const Matrix& y, const Matrix& dy, Matrix* dx,
                std::span<const int> active) override;

 private:
  Shape shape_;
};

// Per-sample standardization: each row is shifted to zero mean and scaled to
// unit variance. No parameters; rows do not interact.
class RowNorm final : public Layer {
 public:
  explicit RowNorm(Shape in) : shape_(in) {}
  std::string_view name() const override { return "rownorm"; }
  Shape input_shape() const override { return shape_; }
  Shape output_shape() const override { return shape_; }
  void forward(const Matrix& x, Matrix& y) override;
  void backward(const Matrix& x, const Matrix& y, const Matrix& dy, Matrix* dx,
                std::span<const int> active) override;

 private:
  Shape shape_;
  std::vector<float> inv_std_;
};

// 2x2 max pooling with stride 2 (floor on odd sizes).
class MaxPool2d final : public Layer {
 public:
  explicit MaxPool2d(Shape in);
  std::string_view name() const override { return "maxpool2d"; }
  Shape input_shape() const override { return in_; }
  Shape output_shape() const override { return out_; }
  void forward(const Matrix& x, Matrix& y) override;
  void backward(const Matrix& x, const Matrix& y, const Matrix& dy, Matrix* dx,
                std::span<const int> active) override;

 private:
  Shape in_;
  Shape out_;
  std::vector<int> argmax_;
};

// Fully connected layer over the flattened input.
class Linear final : public Layer {
 public:
  Linear(Shape in, int out_features, bool output_layer = false);
  std::string_view name() const override { return "linear"; }
  Shape input_shape() const override { return in_; }
  Shape output_shape() const override { return {out_features_, 1, 1}; }
  std::size_t param_count() const override;
  void bind(float* params, float* grads) override;
  void init(std::mt19937_64& rng) override;
  void forward(const Matrix& x, Matrix& y) override;
  void backward(const Matrix& x, const Matrix& y, const Matrix& dy, Matrix* dx,
                std::span<const int> active) override;

 private:
  Shape in_;
  int out_features_;
  bool output_layer_;
  float* weight_ = nullptr;
  float* bias_ = nullptr;
  float* weight_grad_ = nullptr;
  float* bias_grad_ = nullptr;
};

struct BackboneSpec {
  // "cnn6": six 3x3 convolutions in three pooled pairs, then fc and output.
  // "mlp": one hidden fully connected layer (cheap, used by tests).
  std::string id = "cnn6";
  std::vector<int> conv_channels = {16, 16, 32, 32, 64, 64};
  int fc_width = 256;
};

// Feed-forward classifier producing class logits. The output of the layer
// marked as the feature layer (the fc block before the classifier) is kept
// after every forward pass for curriculum feature extraction.
class Network {
 public:
  Network(Shape input, int num_classes, std::vector<std::unique_ptr<Layer>> layers,
          std::size_t feature_layer);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  void init(std::uint64_t seed);

  const Matrix& forward(const Matrix& x);

  // Gradients of the loss w.r.t. the logits of the last forward pass. Rows
  // outside `active` must be zero. Overwrites the gradient buffer.
  void backward(const Matrix& dlogits, std::span<const int> active);

  [[nodiscard]] const Matrix& features() const;
  [[nodiscard]] int feature_width() const;
  [[nodiscard]] int num_classes() const { return num_classes_; }
  [[nodiscard]] Shape input_shape() const { return input_; }

  [[nodiscard]] std::span<float> parameters() { return params_; }
  [[nodiscard]] std::span<const float> parameters() const { return params_; }
  [[nodiscard]] std::span<float> gradients() { return grads_; }
  [[nodiscard]] std::span<const float> gradients() const { return grads_; }

  [[nodiscard]] const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

 private:
  Shape input_;
  int num_classes_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::size_t feature_layer_;
  // each layer's slice starts on a 64-byte boundary so vectorized
  // reductions see the same alignment in every process
  std::vector<float, Eigen::aligned_allocator<float>> params_;
  std::vector<float, Eigen::aligned_allocator<float>> grads_;
  std::vector<Matrix> acts_;  // acts_[0] is the input, acts_[i+1] layer i output
  std::vector<Matrix> deltas_;
};

Network make_network(const BackboneSpec& spec, Shape input, int num_classes);

// Runs inference in chunks; returns n x c logits.
Matrix predict_logits(Network& net, const Matrix& x, int chunk = 512);

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  // Linear learning-rate ramp over the first warmup_epochs epochs.
  int warmup_epochs = 0;
};

// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
class Sgd {
 public:
  Sgd(std::size_t n, SgdOptions options);
  // `lr_scale` multiplies the configured learning rate for this step.
  void step(std::span<float> params, std::span<const float> grads, double lr_scale = 1.0);

  [[nodiscard]] const SgdOptions& options() const { return options_; }
  [[nodiscard]] std::span<const float> velocity() const { return velocity_; }
  void set_velocity(std::span<const float> v);

 private:
  SgdOptions options_;
  std::vector<float> velocity_;
};

}  // namespace cocorrect::nn
