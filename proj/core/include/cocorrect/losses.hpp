#pragma once

// Loss terms over batches of class-probability rows. The scalar functions
// take probabilities and clamp logarithms at kLogEpsilon. The row and
// gradient helpers take log-domain inputs and never clamp, which keeps label
// gradients alive when a label distribution saturates.

#include <span>

#include <Eigen/Core>

namespace cocorrect {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorD = Eigen::VectorXd;

inline constexpr double kLogEpsilon = 1e-12;

struct LossWeights {
  double alpha = 1.0;  // compatibility term
  double beta = 0.1;   // entropy term
};

MatrixD softmax_rows(const MatrixD& logits);
MatrixD log_softmax_rows(const MatrixD& logits);
MatrixD one_hot(std::span<const int> labels, int num_classes);

// Argmax per row, ties to the lowest index.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row);

double ce_hard(const MatrixD& pred, std::span<const int> labels);
// KL(pred || yd), batch mean.
double kl_flipped(const MatrixD& pred, const MatrixD& yd);
double compat_loss(const MatrixD& noisy_onehot, const MatrixD& yd);
double entropy_loss(const MatrixD& pred);

struct LossTerms {
  double soft = 0.0;    // l_c^soft
  double compat = 0.0;  // l_o
  double entropy = 0.0; // l_e
  double total = 0.0;
};

LossTerms stage3_terms(const MatrixD& pred, const MatrixD& yd, const MatrixD& noisy_onehot,
                       const LossWeights& weights);
double stage3_loss(const MatrixD& pred, const MatrixD& yd, const MatrixD& noisy_onehot,
                   const LossWeights& weights);

// Per-sample values from log probabilities.
VectorD ce_rows(const MatrixD& log_pred, std::span<const int> labels);
VectorD kl_rows(const MatrixD& log_pred, const MatrixD& log_yd);
VectorD compat_rows(std::span<const int> labels, const MatrixD& log_yd);
VectorD entropy_rows(const MatrixD& log_pred);

// d stage3_loss / d label_logits for a batch of b rows (1/b normalization).
// The entropy term does not depend on the labels.
MatrixD stage3_label_gradient(const MatrixD& pred, const MatrixD& label_logits,
                              std::span<const int> labels, double alpha);

// Gradients w.r.t. network logits, nonzero only on `rows` and normalized by
// rows.size(): cross-entropy against hard labels, and l_c^soft + beta * l_e
// against soft labels given as log probabilities.
MatrixD ce_logit_gradient(const MatrixD& log_pred, std::span<const int> labels,
                          std::span<const int> rows);
MatrixD soft_logit_gradient(const MatrixD& log_pred, const MatrixD& log_yd, double beta,
                            std::span<const int> rows);

}  // namespace cocorrect
