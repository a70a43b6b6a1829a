#include "cocorrect/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cocorrect/errors.hpp"

namespace cocorrect {

namespace fs = std::filesystem;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::string_view to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::kNone: return "none";
    case NoiseModel::kSymmetric: return "symmetric";
    case NoiseModel::kPairflip: return "pairflip";
  }
  return "unknown";
}

NoiseModel parse_noise_model(std::string_view name) {
  if (name == "none") return NoiseModel::kNone;
  if (name == "symmetric") return NoiseModel::kSymmetric;
  if (name == "pairflip") return NoiseModel::kPairflip;
  throw ConfigError("unknown noise model: " + std::string(name));
}

std::string_view to_string(Augment augment) {
  switch (augment) {
    case Augment::kNone: return "none";
    case Augment::kPerspectiveJitter: return "perspective_jitter";
    case Augment::kFlipRotate: return "flip_rotate";
  }
  return "unknown";
}

Augment parse_augment(std::string_view name) {
  if (name == "none") return Augment::kNone;
  if (name == "perspective_jitter") return Augment::kPerspectiveJitter;
  if (name == "flip_rotate") return Augment::kFlipRotate;
  throw ConfigError("unknown augmentation: " + std::string(name));
}

NoisySample NoisyDataset::sample(int id) const {
  return {id,
          std::span<const float>(images.row(id).data(), static_cast<std::size_t>(images.cols())),
          clean_labels[id], noisy_labels[id], splits[id]};
}

std::vector<int> NoisyDataset::ids(Split split) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (splits[i] == split) out.push_back(i);
  }
  return out;
}

int NoisyDataset::count(Split split) const {
  return static_cast<int>(std::count(splits.begin(), splits.end(), split));
}

// --- loading --------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const fs::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw LoadError("truncated IDX header: " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

std::ifstream open_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

nn::Matrix read_idx_images(const fs::path& path, int& rows, int& cols) {
  auto in = open_binary(path);
  if (read_be32(in, path) != 0x803) throw LoadError("bad IDX image magic: " + path.string());
  const auto count = static_cast<int>(read_be32(in, path));
  rows = static_cast<int>(read_be32(in, path));
  cols = static_cast<int>(read_be32(in, path));
  std::vector<unsigned char> raw(static_cast<std::size_t>(count) * rows * cols);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw LoadError("truncated IDX image data: " + path.string());
  }
  nn::Matrix images(count, rows * cols);
  for (std::size_t i = 0; i < raw.size(); ++i) images.data()[i] = static_cast<float>(raw[i]) / 255.0F;
  return images;
}

std::vector<int> read_idx_labels(const fs::path& path) {
  auto in = open_binary(path);
  if (read_be32(in, path) != 0x801) throw LoadError("bad IDX label magic: " + path.string());
  const auto count = read_be32(in, path);
  std::vector<unsigned char> raw(count);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw LoadError("truncated IDX label data: " + path.string());
  }
  std::vector<int> labels(raw.begin(), raw.end());
  for (int y : labels) {
    if (y < 0 || y > 9) throw LoadError("label out of range in " + path.string());
  }
  return labels;
}

NoisyDataset load_mnist(const fs::path& root) {
  NoisyDataset ds;
  ds.image_shape = {1, 28, 28};
  ds.num_classes = 10;
  for (int c = 0; c < 10; ++c) ds.class_names.push_back(std::to_string(c));

  int h = 0;
  int w = 0;
  const nn::Matrix train = read_idx_images(root / "train-images-idx3-ubyte", h, w);
  const std::vector<int> train_labels = read_idx_labels(root / "train-labels-idx1-ubyte");
  const nn::Matrix test = read_idx_images(root / "t10k-images-idx3-ubyte", h, w);
  const std::vector<int> test_labels = read_idx_labels(root / "t10k-labels-idx1-ubyte");
  if (h != 28 || w != 28 || train.rows() != static_cast<Eigen::Index>(train_labels.size()) ||
      test.rows() != static_cast<Eigen::Index>(test_labels.size())) {
    throw LoadError("inconsistent MNIST files under " + root.string());
  }
  ds.images.resize(train.rows() + test.rows(), 28 * 28);
  ds.images.topRows(train.rows()) = train;
  ds.images.bottomRows(test.rows()) = test;
  ds.clean_labels = train_labels;
  ds.clean_labels.insert(ds.clean_labels.end(), test_labels.begin(), test_labels.end());
  ds.noisy_labels = ds.clean_labels;
  ds.splits.assign(train_labels.size(), Split::kTrain);
  ds.splits.resize(ds.clean_labels.size(), Split::kTest);
  return ds;
}

NoisyDataset load_folder(const fs::path& root, const LoadOptions& options) {
  if (!fs::is_directory(root)) throw LoadError("image folder not found: " + root.string());
  if (options.channels != 1 && options.channels != 3) throw ConfigError("image channels must be 1 or 3");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw LoadError("no class subdirectories in " + root.string());

  NoisyDataset ds;
  ds.image_shape = {options.channels, options.height, options.width};
  ds.num_classes = static_cast<int>(class_dirs.size());
  std::vector<std::vector<float>> rows;
  for (int c = 0; c < ds.num_classes; ++c) {
    ds.class_names.push_back(class_dirs[c].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c])) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const int flag = options.channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR;
      cv::Mat img = cv::imread(file.string(), flag);
      if (img.empty()) throw LoadError("cannot decode image " + file.string());
      if (options.channels == 3) cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
      cv::resize(img, img, cv::Size(options.width, options.height), 0, 0, cv::INTER_AREA);
      img.convertTo(img, options.channels == 1 ? CV_32FC1 : CV_32FC3, 1.0 / 255.0);
      std::vector<cv::Mat> planes;
      cv::split(img, planes);
      std::vector<float> row;
      row.reserve(static_cast<std::size_t>(ds.image_shape.size()));
      for (const auto& p : planes) {
        const cv::Mat plane = p.isContinuous() ? p : p.clone();
        row.insert(row.end(), plane.ptr<float>(), plane.ptr<float>() + plane.total());
      }
      rows.push_back(std::move(row));
      ds.clean_labels.push_back(c);
    }
  }
  if (rows.empty()) throw LoadError("no images found under " + root.string());
  ds.images.resize(static_cast<Eigen::Index>(rows.size()), ds.image_shape.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), ds.images.row(static_cast<Eigen::Index>(i)).data());
  }
  ds.noisy_labels = ds.clean_labels;
  ds.splits.assign(rows.size(), Split::kTrain);
  return ds;
}

NoisyDataset select_rows(const NoisyDataset& ds, const std::vector<int>& keep) {
  NoisyDataset out;
  out.image_shape = ds.image_shape;
  out.num_classes = ds.num_classes;
  out.class_names = ds.class_names;
  out.images.resize(static_cast<Eigen::Index>(keep.size()), ds.images.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.images.row(static_cast<Eigen::Index>(i)) = ds.images.row(keep[i]);
    out.clean_labels.push_back(ds.clean_labels[keep[i]]);
    out.noisy_labels.push_back(ds.noisy_labels[keep[i]]);
    out.splits.push_back(ds.splits[keep[i]]);
  }
  return out;
}

}  // namespace

NoisyDataset load_dataset(std::string_view name, const fs::path& root, const LoadOptions& options) {
  if (name == "mnist") return load_mnist(root);
  if (name == "folder") return load_folder(root, options);
  throw ConfigError("unknown dataset: " + std::string(name));
}

NoisyDataset subset_train(NoisyDataset ds, int n_train, std::uint64_t seed) {
  std::vector<int> train = ds.ids(Split::kTrain);
  if (n_train <= 0 || n_train >= static_cast<int>(train.size())) return ds;
  Rng rng(derive_seed(seed, {0x5B5E7}));
  fisher_yates(std::span<int>(train), rng);
  std::vector<char> keep(static_cast<std::size_t>(ds.size()), 1);
  for (std::size_t i = static_cast<std::size_t>(n_train); i < train.size(); ++i) keep[train[i]] = 0;
  std::vector<int> rows;
  for (int i = 0; i < ds.size(); ++i) {
    if (keep[i] != 0) rows.push_back(i);
  }
  return select_rows(ds, rows);
}

NoisyDataset split_dataset(NoisyDataset ds, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be nonnegative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::vector<int> pool = ds.ids(Split::kTrain);
  const auto n = static_cast<double>(pool.size());
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * n + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * n + 1e-9));
  Rng rng(derive_seed(seed, {0x5B117}));
  fisher_yates(std::span<int>(pool), rng);
  const std::size_t n_train = pool.size() - n_val - n_test;
  for (std::size_t i = n_train; i < pool.size(); ++i) {
    ds.splits[pool[i]] = i < n_train + n_val ? Split::kValidation : Split::kTest;
  }
  return ds;
}

int pairflip_label(int label, int num_classes) { return (label + 1) % num_classes; }

void corrupt_labels(NoisyDataset& ds, std::span<const int> ids, NoiseModel model, Rng& rng) {
  const int c = ds.num_classes;
  for (int id : ids) {
    const int y = ds.clean_labels[id];
    switch (model) {
      case NoiseModel::kNone:
        ds.noisy_labels[id] = y;
        break;
      case NoiseModel::kSymmetric: {
        const auto r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(c - 1)));
        ds.noisy_labels[id] = r < y ? r : r + 1;
        break;
      }
      case NoiseModel::kPairflip:
        ds.noisy_labels[id] = pairflip_label(y, c);
        break;
    }
  }
}

NoisyDataset inject_noise(NoisyDataset ds, const NoiseSpec& spec, Split split) {
  if (split != Split::kTrain) throw ConfigError("label noise may only be injected into the train split");
  if (!(spec.rate >= 0.0) || spec.rate >= 1.0) throw ConfigError("noise rate must be in [0, 1)");
  if (spec.model == NoiseModel::kNone || spec.rate == 0.0) return ds;
  if (ds.num_classes < 2) throw ConfigError("label noise requires at least 2 classes");
  std::vector<int> pool = ds.ids(Split::kTrain);
  const auto k = static_cast<std::size_t>(std::llround(spec.rate * static_cast<double>(pool.size())));
  Rng rng(derive_seed(spec.seed, {0x9015E}));
  fisher_yates(std::span<int>(pool), rng);
  std::vector<int> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());
  corrupt_labels(ds, chosen, spec.model, rng);
  return ds;
}

void write_noise_manifest(const NoisyDataset& ds, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "id,clean_label,noisy_label,corrupted\n";
  for (int id : ds.ids(Split::kTrain)) {
    out << id << ',' << ds.clean_labels[id] << ',' << ds.noisy_labels[id] << ','
        << (ds.is_corrupted(id) ? 1 : 0) << '\n';
  }
}

std::vector<ManifestRow> read_noise_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "id,clean_label,noisy_label,corrupted") throw LoadError("bad manifest header: " + path.string());
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManifestRow row{};
    char sep = 0;
    int corrupted = 0;
    if (!(ss >> row.id >> sep >> row.clean_label >> sep >> row.noisy_label >> sep >> corrupted)) {
      throw LoadError("bad manifest row in " + path.string());
    }
    row.corrupted = corrupted != 0;
    rows.push_back(row);
  }
  return rows;
}

// --- augmentation ---------------------------------------------------------

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

void for_each_plane(std::span<float> image, nn::Shape shape, const auto& fn) {
  for (int c = 0; c < shape.channels; ++c) {
    cv::Mat plane(shape.height, shape.width, CV_32FC1,
                  image.data() + static_cast<std::size_t>(c) * shape.plane());
    fn(plane);
  }
}

void random_perspective(std::span<float> image, nn::Shape shape, double distortion, Rng& rng) {
  const auto w = static_cast<float>(shape.width - 1);
  const auto h = static_cast<float>(shape.height - 1);
  const double dx = distortion * shape.width / 2.0;
  const double dy = distortion * shape.height / 2.0;
  const cv::Point2f src[4] = {{0, 0}, {w, 0}, {w, h}, {0, h}};
  const cv::Point2f dst[4] = {
      {static_cast<float>(uniform(rng, 0, dx)), static_cast<float>(uniform(rng, 0, dy))},
      {static_cast<float>(w - uniform(rng, 0, dx)), static_cast<float>(uniform(rng, 0, dy))},
      {static_cast<float>(w - uniform(rng, 0, dx)), static_cast<float>(h - uniform(rng, 0, dy))},
      {static_cast<float>(uniform(rng, 0, dx)), static_cast<float>(h - uniform(rng, 0, dy))}};
  const cv::Mat transform = cv::getPerspectiveTransform(src, dst);
  for_each_plane(image, shape, [&](cv::Mat& plane) {
    cv::Mat warped;
    cv::warpPerspective(plane, warped, transform, plane.size(), cv::INTER_LINEAR,
                        cv::BORDER_CONSTANT, cv::Scalar(0));
    warped.copyTo(plane);
  });
}

void color_jitter(std::span<float> image, double brightness, double contrast, Rng& rng) {
  const double b = uniform(rng, 1.0 - brightness, 1.0 + brightness);
  const double k = uniform(rng, 1.0 - contrast, 1.0 + contrast);
  double mean = 0.0;
  for (float v : image) mean += v;
  mean = mean * b / static_cast<double>(image.size());
  for (float& v : image) {
    const double scaled = (v * b - mean) * k + mean;
    v = static_cast<float>(std::clamp(scaled, 0.0, 1.0));
  }
}

}  // namespace

void augment_image(std::span<float> image, nn::Shape shape, Augment augment, Rng& rng) {
  switch (augment) {
    case Augment::kNone:
      return;
    case Augment::kPerspectiveJitter:
      if (uniform01(rng) < 0.5) random_perspective(image, shape, 0.3, rng);
      color_jitter(image, 0.2, 0.2, rng);
      return;
    case Augment::kFlipRotate: {
      const bool hflip = uniform01(rng) < 0.5;
      const bool vflip = uniform01(rng) < 0.5;
      const auto quarter_turns = static_cast<int>(uniform_index(rng, 4));
      for_each_plane(image, shape, [&](cv::Mat& plane) {
        if (hflip) cv::flip(plane, plane, 1);
        if (vflip) cv::flip(plane, plane, 0);
        if (shape.height == shape.width && quarter_turns != 0) {
          cv::Mat rotated;
          cv::rotate(plane, rotated, quarter_turns - 1);  // ROTATE_90_CLOCKWISE == 0
          rotated.copyTo(plane);
        }
      });
      return;
    }
  }
}

// --- batches --------------------------------------------------------------

BatchStream::BatchStream(const NoisyDataset& ds, Split split, Options options)
    : ds_(&ds), options_(options), order_(ds.ids(split)) {
  if (options_.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (options_.shuffle) {
    Rng rng(derive_seed(options_.seed, {0xBA7C4, static_cast<std::uint64_t>(options_.epoch)}));
    fisher_yates(std::span<int>(order_), rng);
  }
}

int BatchStream::num_batches() const {
  return static_cast<int>((order_.size() + options_.batch_size - 1) / options_.batch_size);
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + static_cast<std::size_t>(options_.batch_size));
  Batch batch;
  batch.ids.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                   order_.begin() + static_cast<std::ptrdiff_t>(end));
  batch.images.resize(static_cast<Eigen::Index>(batch.ids.size()), ds_->images.cols());
  Rng rng(derive_seed(options_.seed, {0xA06, static_cast<std::uint64_t>(options_.epoch),
                                      static_cast<std::uint64_t>(batch_index_)}));
  for (std::size_t i = 0; i < batch.ids.size(); ++i) {
    const int id = batch.ids[i];
    auto row = batch.images.row(static_cast<Eigen::Index>(i));
    row = ds_->images.row(id);
    batch.noisy_labels.push_back(ds_->noisy_labels[id]);
    if (options_.augment != Augment::kNone) {
      augment_image(std::span<float>(row.data(), static_cast<std::size_t>(row.size())),
                    ds_->image_shape, options_.augment, rng);
    }
  }
  cursor_ = end;
  ++batch_index_;
  return batch;
}

}  // namespace cocorrect
