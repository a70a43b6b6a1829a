#pragma once

// Figures and summary tables rendered from run directories. A run directory
// holds metrics.csv and, optionally, config.resolved; runs are grouped by
// noise model and rate.

#include <filesystem>
#include <string>
#include <vector>

#include "cocorrect/metrics.hpp"

namespace cocorrect {

struct RunInfo {
  std::filesystem::path dir;
  std::string name;
  std::string method;
  std::string noise_model;
  double noise_rate = 0.0;
  std::vector<MetricsRecord> history;
};

struct ReportResult {
  int runs = 0;
  std::vector<std::filesystem::path> figures;
  std::filesystem::path summary_csv;
  std::filesystem::path summary_md;
  std::vector<std::string> notes;
};

// Run directories under `root` (root itself if it holds metrics.csv),
// searched up to three levels deep, sorted by path.
std::vector<RunInfo> discover_runs(const std::filesystem::path& root);

// Number of increases in the unlocked-count series.
int count_unlock_steps(const std::vector<MetricsRecord>& history);

// Writes SVG figures plus summary.csv and summary.md into `out_dir`
// (default root/report). Empty input produces a "no data" summary.
ReportResult render_report(const std::filesystem::path& root, const std::filesystem::path& out_dir = {});

// Minimal line plot written as SVG.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);
  void add_series(std::string name, std::vector<double> x, std::vector<double> y, bool step = false);
  void write(const std::filesystem::path& path) const;
  [[nodiscard]] std::string render() const;
  [[nodiscard]] std::size_t series_count() const { return series_.size(); }

 private:
  struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool step;
  };
  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Series> series_;
};

}  // namespace cocorrect
