#include "cocorrect/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "cocorrect/errors.hpp"

namespace cocorrect::nn {

namespace {

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Eigen::VectorXf>;

// Column budget for one im2col chunk (floats per patch row).
constexpr int kColumnBudget = 2048;

void fill_normal(float* p, std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<float>(dist(rng));
}

}  // namespace

// --- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(Shape in, int out_channels, int kernel, int pad)
    : in_(in),
      out_{out_channels, in.height + 2 * pad - kernel + 1, in.width + 2 * pad - kernel + 1},
      kernel_(kernel),
      pad_(pad),
      patch_(in.channels * kernel * kernel) {
  if (out_.height <= 0 || out_.width <= 0 || out_channels <= 0) {
    throw ConfigError("conv2d: invalid geometry");
  }
}

std::size_t Conv2d::param_count() const {
  return static_cast<std::size_t>(out_.channels) * patch_ + out_.channels;
}

void Conv2d::bind(float* params, float* grads) {
  weight_ = params;
  bias_ = params + static_cast<std::size_t>(out_.channels) * patch_;
  weight_grad_ = grads;
  bias_grad_ = grads + static_cast<std::size_t>(out_.channels) * patch_;
}

void Conv2d::init(std::mt19937_64& rng) {
  fill_normal(weight_, static_cast<std::size_t>(out_.channels) * patch_,
              std::sqrt(2.0 / patch_), rng);
  std::fill(bias_, bias_ + out_.channels, 0.0F);
}

int Conv2d::chunk_size() const { return std::max(1, kColumnBudget / out_.plane()); }

void Conv2d::im2col(const float* image, float* col, int col_stride) const {
  const int h = in_.height;
  const int w = in_.width;
  const int oh = out_.height;
  const int ow = out_.width;
  int row = 0;
  for (int c = 0; c < in_.channels; ++c) {
    const float* plane = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx, ++row) {
        float* dst = col + static_cast<std::size_t>(row) * col_stride;
        const int x_lo = std::max(0, pad_ - kx);
        const int x_hi = std::min(ow, w + pad_ - kx);
        for (int y = 0; y < oh; ++y) {
          float* out_row = dst + static_cast<std::size_t>(y) * ow;
          const int iy = y + ky - pad_;
          if (iy < 0 || iy >= h || x_lo >= x_hi) {
            std::fill(out_row, out_row + ow, 0.0F);
            continue;
          }
          std::fill(out_row, out_row + x_lo, 0.0F);
          std::memcpy(out_row + x_lo, plane + static_cast<std::size_t>(iy) * w + (x_lo + kx - pad_),
                      sizeof(float) * static_cast<std::size_t>(x_hi - x_lo));
          std::fill(out_row + x_hi, out_row + ow, 0.0F);
        }
      }
    }
  }
}

void Conv2d::col2im(const float* col, int col_stride, float* image) const {
  const int h = in_.height;
  const int w = in_.width;
  const int oh = out_.height;
  const int ow = out_.width;
  int row = 0;
  for (int c = 0; c < in_.channels; ++c) {
    float* plane = image + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < kernel_; ++ky) {
      for (int kx = 0; kx < kernel_; ++kx, ++row) {
        const float* src = col + static_cast<std::size_t>(row) * col_stride;
        const int x_lo = std::max(0, pad_ - kx);
        const int x_hi = std::min(ow, w + pad_ - kx);
        for (int y = 0; y < oh; ++y) {
          const int iy = y + ky - pad_;
          if (iy < 0 || iy >= h) continue;
          const float* in_row = src + static_cast<std::size_t>(y) * ow;
          float* dst = plane + static_cast<std::size_t>(iy) * w + (kx - pad_);
          for (int x = x_lo; x < x_hi; ++x) dst[x] += in_row[x];
        }
      }
    }
  }
}

void Conv2d::forward(const Matrix& x, Matrix& y) {
  const int n = static_cast<int>(x.rows());
  const int plane = out_.plane();
  const int chunk = chunk_size();
  y.resize(n, out_.size());
  ConstMatrixMap weight(weight_, out_.channels, patch_);
  for (int s0 = 0; s0 < n; s0 += chunk) {
    const int m = std::min(chunk, n - s0);
    const int cols = m * plane;
    col_.resize(patch_, cols);
    for (int j = 0; j < m; ++j) im2col(x.row(s0 + j).data(), col_.data() + j * plane, cols);
    buf_.resize(out_.channels, cols);
    buf_.noalias() = weight * col_;
    for (int j = 0; j < m; ++j) {
      float* dst = y.row(s0 + j).data();
      for (int co = 0; co < out_.channels; ++co) {
        const float b = bias_[co];
        const float* src = buf_.data() + static_cast<std::size_t>(co) * cols + j * plane;
        float* d = dst + static_cast<std::size_t>(co) * plane;
        for (int p = 0; p < plane; ++p) d[p] = src[p] + b;
      }
    }
  }
}

void Conv2d::backward(const Matrix& x, const Matrix& /*y*/, const Matrix& dy, Matrix* dx,
                      std::span<const int> active) {
  const int plane = out_.plane();
  const int chunk = chunk_size();
  if (dx != nullptr) dx->setZero(x.rows(), x.cols());
  MatrixMap weight_grad(weight_grad_, out_.channels, patch_);
  ConstMatrixMap weight(weight_, out_.channels, patch_);
  Matrix dcol;
  const int n = static_cast<int>(active.size());
  for (int s0 = 0; s0 < n; s0 += chunk) {
    const int m = std::min(chunk, n - s0);
    const int cols = m * plane;
    col_.resize(patch_, cols);
    buf_.resize(out_.channels, cols);
    for (int j = 0; j < m; ++j) {
      const int r = active[s0 + j];
      im2col(x.row(r).data(), col_.data() + j * plane, cols);
      const float* src = dy.row(r).data();
      for (int co = 0; co < out_.channels; ++co) {
        std::memcpy(buf_.data() + static_cast<std::size_t>(co) * cols + j * plane,
                    src + static_cast<std::size_t>(co) * plane, sizeof(float) * plane);
      }
    }
    weight_grad.noalias() += buf_ * col_.transpose();
    for (int co = 0; co < out_.channels; ++co) bias_grad_[co] += buf_.row(co).sum();
    if (dx != nullptr) {
      dcol.resize(patch_, cols);
      dcol.noalias() = weight.transpose() * buf_;
      for (int j = 0; j < m; ++j) {
        col2im(dcol.data() + j * plane, cols, dx->row(active[s0 + j]).data());
      }
    }
  }
}

// --- Relu -----------------------------------------------------------------

void Relu::forward(const Matrix& x, Matrix& y) { y = x.cwiseMax(0.0F); }

void Relu::backward(const Matrix& /*x*/, const Matrix& y, const Matrix& dy, Matrix* dx,
                    std::span<const int> active) {
  if (dx == nullptr) return;
  dx->setZero(dy.rows(), dy.cols());
  for (int r : active) {
    dx->row(r) = (y.row(r).array() > 0.0F).select(dy.row(r), 0.0F);
  }
}

// --- RowNorm --------------------------------------------------------------

void RowNorm::forward(const Matrix& x, Matrix& y) {
  constexpr float kEps = 1e-5F;
  y.resize(x.rows(), x.cols());
  inv_std_.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const float mean = x.row(r).mean();
    const float var = (x.row(r).array() - mean).square().mean();
    const float inv = 1.0F / std::sqrt(var + kEps);
    inv_std_[static_cast<std::size_t>(r)] = inv;
    y.row(r) = (x.row(r).array() - mean) * inv;
  }
}

void RowNorm::backward(const Matrix& /*x*/, const Matrix& y, const Matrix& dy, Matrix* dx,
                       std::span<const int> active) {
  if (dx == nullptr) return;
  dx->setZero(dy.rows(), dy.cols());
  for (int r : active) {
    const float mean_dy = dy.row(r).mean();
    const float mean_dy_y = dy.row(r).cwiseProduct(y.row(r)).mean();
    dx->row(r) = (dy.row(r).array() - mean_dy - y.row(r).array() * mean_dy_y) * inv_std_[static_cast<std::size_t>(r)];
  }
}

// --- MaxPool2d ------------------------------------------------------------

MaxPool2d::MaxPool2d(Shape in) : in_(in), out_{in.channels, in.height / 2, in.width / 2} {
  if (out_.height == 0 || out_.width == 0) throw ConfigError("maxpool2d: input too small");
}

void MaxPool2d::forward(const Matrix& x, Matrix& y) {
  const int n = static_cast<int>(x.rows());
  y.resize(n, out_.size());
  argmax_.resize(static_cast<std::size_t>(n) * out_.size());
  const int w = in_.width;
  for (int s = 0; s < n; ++s) {
    const float* src = x.row(s).data();
    float* dst = y.row(s).data();
    int* arg = argmax_.data() + static_cast<std::size_t>(s) * out_.size();
    int o = 0;
    for (int c = 0; c < out_.channels; ++c) {
      const int base = c * in_.plane();
      for (int oy = 0; oy < out_.height; ++oy) {
        for (int ox = 0; ox < out_.width; ++ox, ++o) {
          const int i0 = base + (2 * oy) * w + 2 * ox;
          int best = i0;
          for (int idx : {i0 + 1, i0 + w, i0 + w + 1}) {
            if (src[idx] > src[best]) best = idx;
          }
          dst[o] = src[best];
          arg[o] = best;
        }
      }
    }
  }
}

void MaxPool2d::backward(const Matrix& x, const Matrix& /*y*/, const Matrix& dy, Matrix* dx,
                         std::span<const int> active) {
  if (dx == nullptr) return;
  dx->setZero(x.rows(), x.cols());
  for (int r : active) {
    const int* arg = argmax_.data() + static_cast<std::size_t>(r) * out_.size();
    const float* g = dy.row(r).data();
    float* d = dx->row(r).data();
    for (int o = 0; o < out_.size(); ++o) d[arg[o]] += g[o];
  }
}

// --- Linear ---------------------------------------------------------------

Linear::Linear(Shape in, int out_features, bool output_layer)
    : in_(in), out_features_(out_features), output_layer_(output_layer) {
  if (out_features <= 0) throw ConfigError("linear: out_features must be positive");
}

std::size_t Linear::param_count() const {
  return static_cast<std::size_t>(out_features_) * in_.size() + out_features_;
}

void Linear::bind(float* params, float* grads) {
  weight_ = params;
  bias_ = params + static_cast<std::size_t>(out_features_) * in_.size();
  weight_grad_ = grads;
  bias_grad_ = grads + static_cast<std::size_t>(out_features_) * in_.size();
}

void Linear::init(std::mt19937_64& rng) {
  std::fill(bias_, bias_ + out_features_, 0.0F);
  if (output_layer_) {
    // zero logits tie everywhere, so two fresh networks agree on every
    // sample and the agreement set starts as the full batch
    std::fill(weight_, weight_ + static_cast<std::size_t>(out_features_) * in_.size(), 0.0F);
    return;
  }
  fill_normal(weight_, static_cast<std::size_t>(out_features_) * in_.size(), std::sqrt(2.0 / in_.size()), rng);
}

void Linear::forward(const Matrix& x, Matrix& y) {
  ConstMatrixMap weight(weight_, out_features_, in_.size());
  Eigen::Map<const Eigen::RowVectorXf> bias(bias_, out_features_);
  y.resize(x.rows(), out_features_);
  y.noalias() = x * weight.transpose();
  y.rowwise() += bias;
}

void Linear::backward(const Matrix& x, const Matrix& /*y*/, const Matrix& dy, Matrix* dx,
                      std::span<const int> /*active*/) {
  ConstMatrixMap weight(weight_, out_features_, in_.size());
  MatrixMap weight_grad(weight_grad_, out_features_, in_.size());
  Eigen::Map<Eigen::RowVectorXf> bias_grad(bias_grad_, out_features_);
  weight_grad.noalias() += dy.transpose() * x;
  bias_grad += dy.colwise().sum();
  if (dx != nullptr) {
    dx->resize(x.rows(), x.cols());
    dx->noalias() = dy * weight;
  }
}

// --- Network --------------------------------------------------------------

Network::Network(Shape input, int num_classes, std::vector<std::unique_ptr<Layer>> layers,
                 std::size_t feature_layer)
    : input_(input),
      num_classes_(num_classes),
      layers_(std::move(layers)),
      feature_layer_(feature_layer) {
  if (layers_.empty() || feature_layer_ >= layers_.size()) {
    throw ConfigError("network: invalid layer list");
  }
  if (layers_.back()->output_shape().size() != num_classes_) {
    throw ConfigError("network: output width does not match class count");
  }
  constexpr std::size_t kAlign = 16;  // floats
  const auto padded = [](std::size_t n) { return (n + kAlign - 1) / kAlign * kAlign; };
  std::size_t total = 0;
  for (const auto& layer : layers_) total += padded(layer->param_count());
  params_.assign(total, 0.0F);
  grads_.assign(total, 0.0F);
  std::size_t offset = 0;
  for (auto& layer : layers_) {
    layer->bind(params_.data() + offset, grads_.data() + offset);
    offset += padded(layer->param_count());
  }
  acts_.resize(layers_.size() + 1);
  deltas_.resize(layers_.size() + 1);
}

void Network::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) layer->init(rng);
}

const Matrix& Network::forward(const Matrix& x) {
  if (x.cols() != input_.size()) throw RuntimeFailure("network: input width mismatch");
  acts_[0] = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->forward(acts_[i], acts_[i + 1]);
  return acts_.back();
}

void Network::backward(const Matrix& dlogits, std::span<const int> active) {
  std::fill(grads_.begin(), grads_.end(), 0.0F);
  deltas_.back() = dlogits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    Matrix* dx = i > 0 ? &deltas_[i] : nullptr;
    layers_[i]->backward(acts_[i], acts_[i + 1], deltas_[i + 1], dx, active);
  }
}

const Matrix& Network::features() const { return acts_[feature_layer_ + 1]; }

int Network::feature_width() const { return layers_[feature_layer_]->output_shape().size(); }

Network make_network(const BackboneSpec& spec, Shape input, int num_classes) {
  std::vector<std::unique_ptr<Layer>> layers;
  Shape shape = input;
  auto push = [&](std::unique_ptr<Layer> layer) {
    shape = layer->output_shape();
    layers.push_back(std::move(layer));
  };
  if (spec.id == "cnn6") {
    if (spec.conv_channels.size() != 6) throw ConfigError("cnn6 backbone needs 6 conv widths");
    for (std::size_t i = 0; i < spec.conv_channels.size(); ++i) {
      push(std::make_unique<Conv2d>(shape, spec.conv_channels[i]));
      push(std::make_unique<Relu>(shape));
      if (i % 2 == 1) push(std::make_unique<MaxPool2d>(shape));
    }
  } else if (spec.id != "mlp") {
    throw ConfigError("unknown backbone: " + spec.id);
  }
  push(std::make_unique<Linear>(shape, spec.fc_width));
  push(std::make_unique<Relu>(shape));
  const std::size_t feature_layer = layers.size() - 1;
  push(std::make_unique<RowNorm>(shape));
  push(std::make_unique<Linear>(shape, num_classes, true));
  return Network(input, num_classes, std::move(layers), feature_layer);
}

Matrix predict_logits(Network& net, const Matrix& x, int chunk) {
  Matrix out(x.rows(), net.num_classes());
  for (Eigen::Index s = 0; s < x.rows(); s += chunk) {
    const Eigen::Index m = std::min<Eigen::Index>(chunk, x.rows() - s);
    Matrix block = x.middleRows(s, m);
    out.middleRows(s, m) = net.forward(block);
  }
  return out;
}

// --- Sgd ------------------------------------------------------------------

Sgd::Sgd(std::size_t n, SgdOptions options) : options_(options), velocity_(n, 0.0F) {}

void Sgd::set_velocity(std::span<const float> v) {
  if (v.size() != velocity_.size()) throw RuntimeFailure("sgd: velocity size mismatch");
  std::copy(v.begin(), v.end(), velocity_.begin());
}

void Sgd::step(std::span<float> params, std::span<const float> grads, double lr_scale) {
  const auto lr = static_cast<float>(options_.lr * lr_scale);
  const auto mu = static_cast<float>(options_.momentum);
  const auto wd = static_cast<float>(options_.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i] + wd * params[i];
    velocity_[i] = mu * velocity_[i] + g;
    params[i] -= lr * velocity_[i];
  }
}

}  // namespace cocorrect::nn
