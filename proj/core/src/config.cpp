#include "cocorrect/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "cocorrect/errors.hpp"

namespace cocorrect {

using nlohmann::json;

std::string_view to_string(Method method) {
  return method == Method::kStandard ? "standard" : "cocorrecting";
}

Method parse_method(std::string_view name) {
  if (name == "cocorrecting") return Method::kCoCorrecting;
  if (name == "standard") return Method::kStandard;
  throw ConfigError("unknown method: " + std::string(name));
}

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::kPeer: return "peer";
    case SelectionMode::kOwn: return "own";
    case SelectionMode::kIntersection: return "intersection";
  }
  return "unknown";
}

SelectionMode parse_selection_mode(std::string_view name) {
  if (name == "peer") return SelectionMode::kPeer;
  if (name == "own") return SelectionMode::kOwn;
  if (name == "intersection") return SelectionMode::kIntersection;
  throw ConfigError("unknown selection mode: " + std::string(name));
}

json default_config_json() {
  return json::parse(R"({
    "method": "cocorrecting",
    "seed": 1,
    "output_dir": "runs/default",
    "dataset": {
      "name": "mnist",
      "root": null,
      "subset_size": 0,
      "split": [1.0, 0.0, 0.0],
      "augment": null,
      "height": 32,
      "width": 32,
      "channels": 3
    },
    "noise": {"model": "none", "rate": 0.0, "seed": null},
    "model": {"backbone": "cnn6", "conv_channels": [8, 8, 16, 16, 32, 32], "fc_width": 256},
    "optimizer": {"lr": 0.01, "momentum": 0.9, "weight_decay": null, "warmup_epochs": 1},
    "schedule": {
      "epochs": 60,
      "e_k": 10,
      "tau": null,
      "stage1_epochs": null,
      "stage3_epochs": null,
      "stage4_epochs": null,
      "batch_size": 128
    },
    "label": {"k": 10.0, "lambda": null, "alpha": null, "beta": 0.1, "gradient_mean": "element"},
    "curriculum": {
      "k": 60.0,
      "pca_dim": 128,
      "selection_mode": "peer",
      "select_in_stage3": true,
      "stage4_entropy": false
    },
    "run": {"record_wall_time": true, "checkpoint_every": 1, "eval_batch": 512, "resume": false}
  })");
}

void merge_config(json& base, const json& overlay, const std::string& path) {
  if (!overlay.is_object()) throw ConfigError("config" + (path.empty() ? "" : " at " + path) + " must be an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key: " + full);
    if (base[key].is_object()) {
      merge_config(base[key], value, full);
    } else {
      base[key] = value;
    }
  }
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json patch = std::move(value);
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos = 0;;) {
    const auto dot = rest.find('.', pos);
    parts.push_back(rest.substr(pos, dot - pos));
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge_config(tree, patch);
}

namespace {

template <typename T>
T get(const json& tree, const char* section, const char* key) {
  const json& node = section == nullptr ? tree.at(key) : tree.at(section).at(key);
  try {
    return node.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for ") + (section ? std::string(section) + "." : "") + key + ": " +
                      node.dump());
  }
}

bool is_auto(const json& tree, const char* section, const char* key) { return tree.at(section).at(key).is_null(); }

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool near(double a, double b) { return std::abs(a - b) < 1e-9; }

}  // namespace

std::optional<double> default_lambda(std::string_view dataset, NoiseModel model, double rate) {
  if (dataset != "mnist") return std::nullopt;
  if (model == NoiseModel::kNone || rate == 0.0) return 500.0;
  if (model == NoiseModel::kPairflip) {
    if (near(rate, 0.2)) return 3000.0;
    if (near(rate, 0.45)) return 4000.0;
    return std::nullopt;
  }
  static constexpr std::array<std::pair<double, double>, 5> kSymmetric{
      {{0.05, 1500.0}, {0.1, 2000.0}, {0.2, 2500.0}, {0.3, 3000.0}, {0.4, 4000.0}}};
  for (const auto& [r, lambda] : kSymmetric) {
    if (near(rate, r)) return lambda;
  }
  return std::nullopt;
}

RunConfig resolve_config(json tree) {
  RunConfig c;
  try {
    c.method = parse_method(get<std::string>(tree, nullptr, "method"));
    c.seed = get<std::uint64_t>(tree, nullptr, "seed");
    c.output_dir = get<std::string>(tree, nullptr, "output_dir");

    auto& d = c.dataset;
    d.name = get<std::string>(tree, "dataset", "name");
    require(d.name == "mnist" || d.name == "folder", "dataset.name must be mnist or folder");
    if (!is_auto(tree, "dataset", "root")) d.root = get<std::string>(tree, "dataset", "root");
    require(d.name != "folder" || !d.root.empty(), "dataset.root is required for folder datasets");
    d.subset_size = get<int>(tree, "dataset", "subset_size");
    require(d.subset_size >= 0, "dataset.subset_size must be >= 0");
    d.split = get<std::array<double, 3>>(tree, "dataset", "split");
    for (double r : d.split) require(r >= 0.0, "dataset.split ratios must be nonnegative");
    require(std::abs(d.split[0] + d.split[1] + d.split[2] - 1.0) <= 1e-9, "dataset.split must sum to 1");
    d.augment = is_auto(tree, "dataset", "augment")
                    ? (d.name == "mnist" ? Augment::kPerspectiveJitter : Augment::kFlipRotate)
                    : parse_augment(get<std::string>(tree, "dataset", "augment"));
    d.height = get<int>(tree, "dataset", "height");
    d.width = get<int>(tree, "dataset", "width");
    d.channels = get<int>(tree, "dataset", "channels");
    require(d.height > 0 && d.width > 0, "dataset image size must be positive");
    require(d.channels == 1 || d.channels == 3, "dataset.channels must be 1 or 3");

    c.noise.model = parse_noise_model(get<std::string>(tree, "noise", "model"));
    c.noise.rate = get<double>(tree, "noise", "rate");
    require(c.noise.rate >= 0.0 && c.noise.rate < 1.0, "noise.rate must be in [0, 1)");
    if (c.noise.model == NoiseModel::kNone) c.noise.rate = 0.0;
    c.noise.seed = is_auto(tree, "noise", "seed") ? c.seed : get<std::uint64_t>(tree, "noise", "seed");

    c.model.id = get<std::string>(tree, "model", "backbone");
    require(c.model.id == "cnn6" || c.model.id == "mlp", "model.backbone must be cnn6 or mlp");
    c.model.conv_channels = get<std::vector<int>>(tree, "model", "conv_channels");
    c.model.fc_width = get<int>(tree, "model", "fc_width");
    require(c.model.fc_width > 0, "model.fc_width must be positive");
    require(c.model.id != "cnn6" || c.model.conv_channels.size() == 6, "cnn6 needs six conv_channels");
    for (int ch : c.model.conv_channels) require(ch > 0, "conv_channels must be positive");

    c.optimizer.lr = get<double>(tree, "optimizer", "lr");
    c.optimizer.momentum = get<double>(tree, "optimizer", "momentum");
    c.optimizer.weight_decay = is_auto(tree, "optimizer", "weight_decay")
                                   ? (d.name == "mnist" ? 0.005 : 0.001)
                                   : get<double>(tree, "optimizer", "weight_decay");
    require(c.optimizer.lr > 0.0, "optimizer.lr must be positive");
    require(c.optimizer.momentum >= 0.0 && c.optimizer.momentum < 1.0, "optimizer.momentum must be in [0, 1)");
    require(c.optimizer.weight_decay >= 0.0, "optimizer.weight_decay must be >= 0");
    c.optimizer.warmup_epochs = get<int>(tree, "optimizer", "warmup_epochs");
    require(c.optimizer.warmup_epochs >= 0, "optimizer.warmup_epochs must be >= 0");

    auto& s = c.schedule;
    s.epochs = get<int>(tree, "schedule", "epochs");
    s.e_k = get<int>(tree, "schedule", "e_k");
    s.batch_size = get<int>(tree, "schedule", "batch_size");
    require(s.epochs >= 1, "schedule.epochs must be >= 1");
    require(s.e_k >= 1, "schedule.e_k must be >= 1");
    require(s.batch_size >= 1, "schedule.batch_size must be >= 1");
    s.tau = is_auto(tree, "schedule", "tau") ? c.noise.rate : get<double>(tree, "schedule", "tau");
    require(s.tau >= 0.0 && s.tau < 1.0, "schedule.tau must be in [0, 1)");
    const bool has1 = !is_auto(tree, "schedule", "stage1_epochs");
    const bool has3 = !is_auto(tree, "schedule", "stage3_epochs");
    const bool has4 = !is_auto(tree, "schedule", "stage4_epochs");
    s.stage1_epochs = has1 ? get<int>(tree, "schedule", "stage1_epochs") : std::min(s.e_k, s.epochs);
    s.stage3_epochs = has3 ? get<int>(tree, "schedule", "stage3_epochs")
                           : std::min(static_cast<int>(0.6 * s.epochs + 1e-9), s.epochs - s.stage1_epochs);
    s.stage4_epochs = has4 ? get<int>(tree, "schedule", "stage4_epochs") : s.epochs - s.stage1_epochs - s.stage3_epochs;
    require(s.stage1_epochs >= 0 && s.stage3_epochs >= 0 && s.stage4_epochs >= 0,
            "stage epochs must be nonnegative and fit in schedule.epochs");
    require(s.stage1_epochs + s.stage3_epochs + s.stage4_epochs == s.epochs,
            "stage epochs (" + std::to_string(s.stage1_epochs) + "+" + std::to_string(s.stage3_epochs) + "+" +
                std::to_string(s.stage4_epochs) + ") must sum to schedule.epochs (" + std::to_string(s.epochs) + ")");

    auto& l = c.label;
    l.k = get<double>(tree, "label", "k");
    l.beta = get<double>(tree, "label", "beta");
    require(l.k >= 0.0, "label.k must be >= 0");
    require(l.beta >= 0.0, "label.beta must be >= 0");
    l.alpha = is_auto(tree, "label", "alpha") ? (c.noise.rate >= 0.4 - 1e-9 ? 0.1 : 0.25)
                                              : get<double>(tree, "label", "alpha");
    require(l.alpha >= 0.0, "label.alpha must be >= 0");
    const auto mean = get<std::string>(tree, "label", "gradient_mean");
    require(mean == "element" || mean == "sample", "label.gradient_mean must be element or sample");
    l.element_mean = mean == "element";
    if (!is_auto(tree, "label", "lambda")) {
      l.lambda = get<double>(tree, "label", "lambda");
    } else if (auto lambda = default_lambda(d.name, c.noise.model, c.noise.rate)) {
      l.lambda = *lambda;
    } else if (c.method == Method::kCoCorrecting) {
      throw ConfigError("label.lambda has no default for this dataset and noise setting; set it explicitly");
    }
    require(l.lambda >= 0.0, "label.lambda must be >= 0");

    auto& cur = c.curriculum;
    cur.k = get<double>(tree, "curriculum", "k");
    require(cur.k > 0.0 && cur.k <= 100.0, "curriculum.k must be in (0, 100]");
    cur.pca_dim = get<int>(tree, "curriculum", "pca_dim");
    require(cur.pca_dim >= 1, "curriculum.pca_dim must be >= 1");
    require(cur.pca_dim <= 2 * c.model.fc_width,
            "curriculum.pca_dim exceeds the concatenated feature width " + std::to_string(2 * c.model.fc_width));
    cur.selection = parse_selection_mode(get<std::string>(tree, "curriculum", "selection_mode"));
    cur.select_in_stage3 = get<bool>(tree, "curriculum", "select_in_stage3");
    cur.stage4_entropy = get<bool>(tree, "curriculum", "stage4_entropy");

    c.run.record_wall_time = get<bool>(tree, "run", "record_wall_time");
    c.run.checkpoint_every = get<int>(tree, "run", "checkpoint_every");
    c.run.eval_batch = get<int>(tree, "run", "eval_batch");
    c.run.resume = get<bool>(tree, "run", "resume");
    require(c.run.checkpoint_every >= 0, "run.checkpoint_every must be >= 0");
    require(c.run.eval_batch >= 1, "run.eval_batch must be >= 1");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  json tree = default_config_json();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    json user = json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw ConfigError("config is not valid JSON: " + file->string());
    merge_config(tree, user);
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return resolve_config(std::move(tree));
}

json to_json(const RunConfig& c) {
  return json{
      {"method", to_string(c.method)},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"dataset",
       {{"name", c.dataset.name},
        {"root", c.dataset.root.empty() ? json(nullptr) : json(c.dataset.root)},
        {"subset_size", c.dataset.subset_size},
        {"split", c.dataset.split},
        {"augment", to_string(c.dataset.augment)},
        {"height", c.dataset.height},
        {"width", c.dataset.width},
        {"channels", c.dataset.channels}}},
      {"noise", {{"model", to_string(c.noise.model)}, {"rate", c.noise.rate}, {"seed", c.noise.seed}}},
      {"model", {{"backbone", c.model.id}, {"conv_channels", c.model.conv_channels}, {"fc_width", c.model.fc_width}}},
      {"optimizer",
       {{"lr", c.optimizer.lr}, {"momentum", c.optimizer.momentum}, {"weight_decay", c.optimizer.weight_decay},
        {"warmup_epochs", c.optimizer.warmup_epochs}}},
      {"schedule",
       {{"epochs", c.schedule.epochs},
        {"e_k", c.schedule.e_k},
        {"tau", c.schedule.tau},
        {"stage1_epochs", c.schedule.stage1_epochs},
        {"stage3_epochs", c.schedule.stage3_epochs},
        {"stage4_epochs", c.schedule.stage4_epochs},
        {"batch_size", c.schedule.batch_size}}},
      {"label", {{"k", c.label.k}, {"lambda", c.label.lambda}, {"alpha", c.label.alpha}, {"beta", c.label.beta},
        {"gradient_mean", c.label.element_mean ? "element" : "sample"}}},
      {"curriculum",
       {{"k", c.curriculum.k},
        {"pca_dim", c.curriculum.pca_dim},
        {"selection_mode", to_string(c.curriculum.selection)},
        {"select_in_stage3", c.curriculum.select_in_stage3},
        {"stage4_entropy", c.curriculum.stage4_entropy}}},
      {"run",
       {{"record_wall_time", c.run.record_wall_time},
        {"checkpoint_every", c.run.checkpoint_every},
        {"eval_batch", c.run.eval_batch},
        {"resume", c.run.resume}}},
  };
}

void write_resolved_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::filesystem::path resolve_data_root(const DatasetConfig& dataset) {
  if (!dataset.root.empty()) return dataset.root;
  const char* env = std::getenv("COCORRECT_DATA_ROOT");
  const std::filesystem::path base = env != nullptr && *env != '\0' ? env : "data";
  return base / dataset.name;
}

NoisyDataset prepare_dataset(const RunConfig& config) {
  const auto& d = config.dataset;
  NoisyDataset ds = load_dataset(d.name, resolve_data_root(d), LoadOptions{d.height, d.width, d.channels});
  if (d.subset_size > 0) ds = subset_train(std::move(ds), d.subset_size, config.seed);
  if (d.split[0] < 1.0) ds = split_dataset(std::move(ds), d.split, config.seed);
  return inject_noise(std::move(ds), config.noise);
}

}  // namespace cocorrect
