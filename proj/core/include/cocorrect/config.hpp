#pragma once

// Experiment configuration. A run is described by a JSON tree; every key has
// a default, unknown keys are rejected, and "auto" values (JSON null) are
// filled in by resolve_config from the dataset and noise settings.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocorrect/dataset.hpp"
#include "cocorrect/nn.hpp"
#include "cocorrect/selection.hpp"

namespace cocorrect {

enum class Method { kCoCorrecting, kStandard };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view name);

struct DatasetConfig {
  std::string name = "mnist";
  std::string root;  // empty: $COCORRECT_DATA_ROOT/<name> or data/<name>
  int subset_size = 0;  // train samples kept; 0 keeps all
  std::array<double, 3> split{1.0, 0.0, 0.0};
  Augment augment = Augment::kPerspectiveJitter;
  int height = 32;
  int width = 32;
  int channels = 3;
};

struct ScheduleConfig {
  int epochs = 60;
  int e_k = 10;
  double tau = 0.0;
  int stage1_epochs = 10;
  int stage3_epochs = 36;
  int stage4_epochs = 14;
  int batch_size = 128;
};

struct LabelConfig {
  double k = 10.0;
  double lambda = 0.0;
  double alpha = 1.0;
  double beta = 0.1;
  // Soft-phase gradients (network and label) averaged over the b*c entries
  // of the batch ("element") rather than over the b samples; the tabulated
  // lambda values assume it.
  bool element_mean = true;
};

struct CurriculumConfig {
  double k = 60.0;
  int pca_dim = 128;
  SelectionMode selection = SelectionMode::kPeer;
  bool select_in_stage3 = true;
  bool stage4_entropy = false;
};

struct RunOptions {
  bool record_wall_time = true;
  int checkpoint_every = 1;
  int eval_batch = 512;
  bool resume = false;
};

struct RunConfig {
  Method method = Method::kCoCorrecting;
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  DatasetConfig dataset;
  NoiseSpec noise;
  nn::BackboneSpec model;
  nn::SgdOptions optimizer;
  ScheduleConfig schedule;
  LabelConfig label;
  CurriculumConfig curriculum;
  RunOptions run;
};

// The default tree, with null for values derived during resolution.
nlohmann::json default_config_json();

// Merges `overlay` into `base`, rejecting keys absent from `base`.
void merge_config(nlohmann::json& base, const nlohmann::json& overlay, const std::string& path = "");

// Applies "a.b.c=value" overrides. Values parse as JSON when possible and
// fall back to plain strings.
void apply_override(nlohmann::json& tree, const std::string& assignment);

// Fills derived values and validates; throws ConfigError.
RunConfig resolve_config(nlohmann::json tree);

// Default tree + optional file + overrides, resolved.
RunConfig load_config(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides = {});

nlohmann::json to_json(const RunConfig& config);
void write_resolved_config(const RunConfig& config, const std::filesystem::path& path);

// Label correction rate for a dataset and nominal noise setting; nullopt if
// the combination has no tabulated value.
std::optional<double> default_lambda(std::string_view dataset, NoiseModel model, double rate);

std::filesystem::path resolve_data_root(const DatasetConfig& dataset);

// Loads, subsets, splits and corrupts the dataset as configured.
NoisyDataset prepare_dataset(const RunConfig& config);

}  // namespace cocorrect
