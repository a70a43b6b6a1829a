#pragma once

// Datasets with injected label noise. Every sample carries its original
// (clean) label, kept for evaluation only, and the possibly corrupted label
// the trainer sees. Sample ids are row indices in [0, n).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cocorrect/nn.hpp"
#include "cocorrect/random.hpp"

namespace cocorrect {

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

std::string_view to_string(Split split);

enum class NoiseModel : std::uint8_t { kNone, kSymmetric, kPairflip };

std::string_view to_string(NoiseModel model);
NoiseModel parse_noise_model(std::string_view name);

struct NoiseSpec {
  NoiseModel model = NoiseModel::kNone;
  double rate = 0.0;
  std::uint64_t seed = 0;
};

// Read-only view of one sample.
struct NoisySample {
  int id;
  std::span<const float> image;
  int clean_label;
  int noisy_label;
  Split split;
};

struct NoisyDataset {
  nn::Shape image_shape;
  int num_classes = 0;
  std::vector<std::string> class_names;
  nn::Matrix images;  // n x image_shape.size(), values in [0, 1]
  std::vector<int> clean_labels;
  std::vector<int> noisy_labels;
  std::vector<Split> splits;

  [[nodiscard]] int size() const { return static_cast<int>(clean_labels.size()); }
  [[nodiscard]] NoisySample sample(int id) const;
  // Ids tagged with `split`, ascending.
  [[nodiscard]] std::vector<int> ids(Split split) const;
  [[nodiscard]] int count(Split split) const;
  [[nodiscard]] bool is_corrupted(int id) const { return clean_labels[id] != noisy_labels[id]; }
};

struct LoadOptions {
  // Target geometry for image-folder datasets; MNIST is always 1x28x28.
  int height = 32;
  int width = 32;
  int channels = 3;
};

// "mnist": IDX files under root (train-images-idx3-ubyte, ...), 60000 train
// and 10000 test samples. "folder": root/<class_name>/<file>, every sample
// tagged train until split_dataset assigns splits.
NoisyDataset load_dataset(std::string_view name, const std::filesystem::path& root,
                          const LoadOptions& options = {});

// Keeps `n_train` train samples chosen by seed plus every non-train sample,
// re-indexing ids in original order.
NoisyDataset subset_train(NoisyDataset ds, int n_train, std::uint64_t seed);

// Reassigns the current train pool to train/validation/test. Validation and
// test take floor(ratio * n) samples; train takes the remainder.
NoisyDataset split_dataset(NoisyDataset ds, std::array<double, 3> ratios, std::uint64_t seed);

// Corrupts exactly round(rate * n_split) samples of `split` (train only).
NoisyDataset inject_noise(NoisyDataset ds, const NoiseSpec& spec, Split split = Split::kTrain);

int pairflip_label(int label, int num_classes);

// Replaces labels of `ids` according to `model`; symmetric draws uniformly
// from the other classes.
void corrupt_labels(NoisyDataset& ds, std::span<const int> ids, NoiseModel model, Rng& rng);

// Writes id,clean_label,noisy_label,corrupted for the train split.
void write_noise_manifest(const NoisyDataset& ds, const std::filesystem::path& path);

struct ManifestRow {
  int id;
  int clean_label;
  int noisy_label;
  bool corrupted;
};
std::vector<ManifestRow> read_noise_manifest(const std::filesystem::path& path);

enum class Augment : std::uint8_t { kNone, kPerspectiveJitter, kFlipRotate };

std::string_view to_string(Augment augment);
Augment parse_augment(std::string_view name);

// Applies the augmentation in place to one image row.
void augment_image(std::span<float> image, nn::Shape shape, Augment augment, Rng& rng);

struct Batch {
  std::vector<int> ids;
  nn::Matrix images;
  std::vector<int> noisy_labels;
};

// Mini-batches over one split. Shuffled order derives from (seed, epoch) so
// the same pair always yields the same order; unshuffled streams iterate
// ids ascending.
class BatchStream {
 public:
  struct Options {
    int batch_size = 128;
    std::uint64_t seed = 0;
    int epoch = 0;
    bool shuffle = true;
    Augment augment = Augment::kNone;
  };

  BatchStream(const NoisyDataset& ds, Split split, Options options);

  [[nodiscard]] std::optional<Batch> next();
  [[nodiscard]] const std::vector<int>& order() const { return order_; }
  [[nodiscard]] int num_batches() const;

 private:
  const NoisyDataset* ds_;
  Options options_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int batch_index_ = 0;
};

}  // namespace cocorrect
