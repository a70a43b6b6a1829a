#pragma once

// Two-network training with agreement-based small-loss selection, label
// correction on a LabelStore, and the density-peak curriculum. Epochs are
// 0-based and global across stages:
//   Stage I   [0, s1)            cross-entropy warm-up on noisy labels
//   Stage II  after epoch s1-1   curriculum built once
//   Stage III [s1, s1+s3)        soft-label loss, labels corrected
//   Stage IV  [s1+s3, epochs)    soft-label fine-tune, labels frozen

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "cocorrect/config.hpp"
#include "cocorrect/curriculum.hpp"
#include "cocorrect/dataset.hpp"
#include "cocorrect/label_store.hpp"
#include "cocorrect/metrics.hpp"
#include "cocorrect/nn.hpp"

namespace cocorrect {

struct EpochStats {
  double l_c = 0.0;
  double l_o = 0.0;
  double l_e = 0.0;
  double r_t = 1.0;
  int steps = 0;
  int skipped_batches = 0;
  std::array<long, 2> selected{0, 0};
  long agreement = 0;
  long samples = 0;
};

struct RunSummary {
  int report_net = 1;
  double final_test_acc = 0.0;
  double final_val_acc = 0.0;
  std::optional<double> final_acc_label;
  std::vector<MetricsRecord> history;
};

// Row-wise argmax of logits.
std::vector<int> predict_classes(nn::Network& net, const nn::Matrix& images, int chunk = 512);

// Test/validation accuracy of a network on one split (0 for empty splits).
double evaluate(nn::Network& net, const NoisyDataset& ds, Split split, int chunk = 512);

// Gathers rows `ids` of the dataset images.
nn::Matrix gather_images(const NoisyDataset& ds, std::span<const int> ids);

class DualTrainer {
 public:
  DualTrainer(RunConfig config, const NoisyDataset& ds);

  EpochStats stage1_epoch(int epoch);
  // Builds the curriculum from both networks' fc features on the train split.
  const CurriculumPlan& build_curriculum();
  EpochStats stage3_epoch(int epoch);
  EpochStats stage4_epoch(int epoch);

  // Runs the remaining schedule, writing metrics, checkpoints and the plan
  // into `run_dir` when given.
  RunSummary run(const std::optional<std::filesystem::path>& run_dir = {});

  // Stage-aware single epoch with unlocking and label updates.
  EpochStats run_epoch(int epoch);
  [[nodiscard]] int stage_of(int epoch) const;

  MetricsRecord evaluate_epoch(int epoch, const EpochStats& stats, double seconds);

  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

  // Concatenated fc features of both networks for `ids` (no augmentation),
  // lower-seeded network first.
  MatrixD extract_features(std::span<const int> ids);

  [[nodiscard]] nn::Network& net(int m) { return nets_[m]; }
  [[nodiscard]] const LabelStore& store() const { return store_; }
  [[nodiscard]] LabelStore& store() { return store_; }
  [[nodiscard]] const std::optional<CurriculumPlan>& plan() const { return plan_; }
  [[nodiscard]] const RunConfig& config() const { return config_; }
  [[nodiscard]] int next_epoch() const { return next_epoch_; }
  [[nodiscard]] std::uint64_t net_seed(int m) const { return net_seeds_[m]; }

  // Swap the roles of the two networks (used to test symmetry).
  void set_net_seeds(std::uint64_t seed1, std::uint64_t seed2);

 private:
  enum class Phase { kWarmup, kCorrect, kFineTune };
  EpochStats train_epoch(int epoch, Phase phase);

  RunConfig config_;
  const NoisyDataset* ds_;
  std::array<nn::Network, 2> nets_;
  std::array<nn::Sgd, 2> optimizers_;
  std::array<std::uint64_t, 2> net_seeds_;
  LabelStore store_;
  std::optional<CurriculumPlan> plan_;
  std::vector<int> train_ids_;
  std::vector<int> train_clean_;
  int next_epoch_ = 0;
};

// Single network, cross-entropy on noisy labels over every train sample.
class StandardTrainer {
 public:
  StandardTrainer(RunConfig config, const NoisyDataset& ds);

  EpochStats train_epoch(int epoch);
  RunSummary run(const std::optional<std::filesystem::path>& run_dir = {});
  MetricsRecord evaluate_epoch(int epoch, const EpochStats& stats, double seconds);

  void save_checkpoint(const std::filesystem::path& path) const;
  void load_checkpoint(const std::filesystem::path& path);

  [[nodiscard]] nn::Network& net() { return net_; }
  [[nodiscard]] int next_epoch() const { return next_epoch_; }

 private:
  RunConfig config_;
  const NoisyDataset* ds_;
  nn::Network net_;
  nn::Sgd optimizer_;
  int next_epoch_ = 0;
};

RunSummary standard_baseline(const RunConfig& config, const NoisyDataset& ds,
                             const std::optional<std::filesystem::path>& run_dir = {});

// Dispatches on config.method; creates run_dir, writes config.resolved.
RunSummary run_experiment(const RunConfig& config, const NoisyDataset& ds, const std::filesystem::path& run_dir);

// Network seeds derived from the run seed.
std::array<std::uint64_t, 2> network_seeds(std::uint64_t run_seed);

}  // namespace cocorrect
