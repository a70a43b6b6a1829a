#pragma once

// Per-sample label logits whose row softmax is the correctable label
// distribution. Rows start at K * onehot(noisy label) and only move once the
// curriculum marks them updatable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cocorrect/losses.hpp"

namespace cocorrect {

class LabelStore {
 public:
  LabelStore() = default;
  LabelStore(std::span<const int> noisy_labels, int num_classes, double k, double lambda);

  [[nodiscard]] int size() const { return static_cast<int>(logits_.rows()); }
  [[nodiscard]] int num_classes() const { return static_cast<int>(logits_.cols()); }
  [[nodiscard]] double k() const { return k_; }
  [[nodiscard]] double lambda() const { return lambda_; }

  [[nodiscard]] const MatrixD& logits() const { return logits_; }
  [[nodiscard]] MatrixD logits(std::span<const int> ids) const;
  [[nodiscard]] MatrixD distributions(std::span<const int> ids) const;
  [[nodiscard]] MatrixD log_distributions(std::span<const int> ids) const;
  [[nodiscard]] std::vector<int> hard_labels() const;

  void set_updatable(std::span<const int> ids, bool updatable = true);
  [[nodiscard]] bool updatable(int id) const { return updatable_[id] != 0; }
  [[nodiscard]] int unlocked_count() const;

  // logits(id) -= lambda * (grad1 + grad2) on updatable ids. Rows with a
  // non-finite gradient are left alone; returns how many were skipped.
  int apply_label_gradient(std::span<const int> ids, const MatrixD& grad1, const MatrixD& grad2);

  // Rows whose argmax has moved away from the initial label at any point.
  [[nodiscard]] int dirty_count() const;
  [[nodiscard]] int skipped_rows() const { return skipped_; }

  // Binary dump with header {n, c, K, lambda, epoch}.
  void save(const std::filesystem::path& path, int epoch) const;
  static LabelStore load(const std::filesystem::path& path, int* epoch = nullptr);
  // CSV dump: id,label_0..label_{c-1},updatable.
  void write_csv(const std::filesystem::path& path) const;

  void write(std::ostream& out) const;
  static LabelStore read(std::istream& in);

  friend bool operator==(const LabelStore& a, const LabelStore& b);

 private:
  MatrixD logits_;
  double k_ = 10.0;
  double lambda_ = 0.0;
  std::vector<int> initial_;
  std::vector<std::uint8_t> updatable_;
  std::vector<std::uint8_t> dirty_;
  int skipped_ = 0;
};

LabelStore init_store(std::span<const int> noisy_labels, int num_classes, double k, double lambda);

}  // namespace cocorrect
