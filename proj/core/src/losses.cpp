#include "cocorrect/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cocorrect {

namespace {

void check_same_shape(const MatrixD& a, const MatrixD& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("loss: shape mismatch");
}

void check_labels(const MatrixD& pred, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != pred.rows()) {
    throw std::invalid_argument("loss: label count does not match batch");
  }
  for (int y : labels) {
    if (y < 0 || y >= pred.cols()) throw std::invalid_argument("loss: label out of range");
  }
}

double safe_log(double p) { return std::log(std::max(p, kLogEpsilon)); }

double batch_mean(double sum, Eigen::Index b) { return b == 0 ? 0.0 : sum / static_cast<double>(b); }

}  // namespace

MatrixD log_softmax_rows(const MatrixD& logits) {
  MatrixD out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

MatrixD softmax_rows(const MatrixD& logits) { return log_softmax_rows(logits).array().exp(); }

MatrixD one_hot(std::span<const int> labels, int num_classes) {
  MatrixD out = MatrixD::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw std::invalid_argument("one_hot: label out of range");
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (int j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double ce_hard(const MatrixD& pred, std::span<const int> labels) {
  check_labels(pred, labels);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) sum -= safe_log(pred(i, labels[i]));
  return batch_mean(sum, pred.rows());
}

double kl_flipped(const MatrixD& pred, const MatrixD& yd) {
  check_same_shape(pred, yd);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const double f = pred(i, j);
      if (f > 0.0) sum += f * (safe_log(f) - safe_log(yd(i, j)));
    }
  }
  return batch_mean(sum, pred.rows());
}

double compat_loss(const MatrixD& noisy_onehot, const MatrixD& yd) {
  check_same_shape(noisy_onehot, yd);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < yd.rows(); ++i) {
    for (Eigen::Index j = 0; j < yd.cols(); ++j) {
      if (noisy_onehot(i, j) != 0.0) sum -= noisy_onehot(i, j) * safe_log(yd(i, j));
    }
  }
  return batch_mean(sum, yd.rows());
}

double entropy_loss(const MatrixD& pred) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      const double f = pred(i, j);
      if (f > 0.0) sum -= f * std::log(f);
    }
  }
  return batch_mean(sum, pred.rows());
}

LossTerms stage3_terms(const MatrixD& pred, const MatrixD& yd, const MatrixD& noisy_onehot,
                       const LossWeights& weights) {
  LossTerms t;
  t.soft = kl_flipped(pred, yd);
  t.compat = compat_loss(noisy_onehot, yd);
  t.entropy = entropy_loss(pred);
  t.total = t.soft + weights.alpha * t.compat + weights.beta * t.entropy;
  return t;
}

double stage3_loss(const MatrixD& pred, const MatrixD& yd, const MatrixD& noisy_onehot,
                   const LossWeights& weights) {
  return stage3_terms(pred, yd, noisy_onehot, weights).total;
}

VectorD ce_rows(const MatrixD& log_pred, std::span<const int> labels) {
  check_labels(log_pred, labels);
  VectorD out(log_pred.rows());
  for (Eigen::Index i = 0; i < log_pred.rows(); ++i) out[i] = -log_pred(i, labels[i]);
  return out;
}

VectorD kl_rows(const MatrixD& log_pred, const MatrixD& log_yd) {
  check_same_shape(log_pred, log_yd);
  return (log_pred.array().exp() * (log_pred - log_yd).array()).rowwise().sum();
}

VectorD compat_rows(std::span<const int> labels, const MatrixD& log_yd) {
  check_labels(log_yd, labels);
  VectorD out(log_yd.rows());
  for (Eigen::Index i = 0; i < log_yd.rows(); ++i) out[i] = -log_yd(i, labels[i]);
  return out;
}

VectorD entropy_rows(const MatrixD& log_pred) {
  return -(log_pred.array().exp() * log_pred.array()).rowwise().sum();
}

MatrixD stage3_label_gradient(const MatrixD& pred, const MatrixD& label_logits,
                              std::span<const int> labels, double alpha) {
  check_same_shape(pred, label_logits);
  check_labels(pred, labels);
  const auto b = static_cast<double>(pred.rows());
  const MatrixD yd = softmax_rows(label_logits);
  // d l_c^soft = (yd - f) / b, d l_o = (yd - onehot) / b
  MatrixD grad = (yd - pred) + alpha * (yd - one_hot(labels, static_cast<int>(pred.cols())));
  return grad / b;
}

MatrixD ce_logit_gradient(const MatrixD& log_pred, std::span<const int> labels,
                          std::span<const int> rows) {
  check_labels(log_pred, labels);
  MatrixD grad = MatrixD::Zero(log_pred.rows(), log_pred.cols());
  if (rows.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (int i : rows) {
    grad.row(i) = log_pred.row(i).array().exp() * scale;
    grad(i, labels[i]) -= scale;
  }
  return grad;
}

MatrixD soft_logit_gradient(const MatrixD& log_pred, const MatrixD& log_yd, double beta,
                            std::span<const int> rows) {
  check_same_shape(log_pred, log_yd);
  MatrixD grad = MatrixD::Zero(log_pred.rows(), log_pred.cols());
  if (rows.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (int i : rows) {
    const Eigen::RowVectorXd f = log_pred.row(i).array().exp();
    const Eigen::RowVectorXd a = log_pred.row(i) - log_yd.row(i);
    const double a_mean = f.dot(a);
    const double h_mean = f.dot(log_pred.row(i));
    // d KL(f||yd)/dz_k = f_k (a_k - E_f[a]); d H(f)/dz_k = -f_k (log f_k - E_f[log f])
    const Eigen::RowVectorXd centered =
        (a.array() - a_mean) - beta * (log_pred.row(i).array() - h_mean);
    grad.row(i) = f.array() * centered.array() * scale;
  }
  return grad;
}

}  // namespace cocorrect
