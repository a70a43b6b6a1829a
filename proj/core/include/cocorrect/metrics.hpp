#pragma once

// Per-epoch run history. One metrics.csv row per epoch with a fixed column
// order; fields that do not apply to a run (second network, label metrics of
// the single-network baseline) are left empty.

#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cocorrect {

struct MetricsRecord {
  int epoch = 0;
  int stage = 1;
  double acc_test_net1 = 0.0;
  std::optional<double> acc_test_net2;
  double acc_val_net1 = 0.0;
  std::optional<double> acc_val_net2;
  std::optional<double> acc_label;
  double l_c = 0.0;
  std::optional<double> l_o;
  std::optional<double> l_e;
  double r_t = 1.0;
  std::optional<int> unlocked;
  std::optional<int> dirty;
  double seconds = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,stage,acc_test_net1,acc_test_net2,acc_val_net1,acc_val_net2,acc_label,l_c,l_o,l_e,r_t,unlocked,dirty,"
    "seconds";

double acc_class(std::span<const int> predictions, std::span<const int> labels);
// Fraction of hard labels equal to the clean labels.
double acc_label(std::span<const int> hard_labels, std::span<const int> clean_labels);

std::string format_metrics_row(const MetricsRecord& record);
MetricsRecord parse_metrics_row(const std::string& line);

// Appends rows to metrics.csv, flushing after each one.
class MetricsWriter {
 public:
  // Truncates unless `keep_epochs_before` is set, in which case rows with
  // epoch >= that value are dropped and the rest kept (used on resume).
  explicit MetricsWriter(const std::filesystem::path& path, std::optional<int> keep_epochs_before = {});
  void append(const MetricsRecord& record);

 private:
  std::ofstream out_;
};

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

}  // namespace cocorrect
