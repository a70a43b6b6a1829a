#include "cocorrect/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "cocorrect/errors.hpp"
#include "cocorrect/losses.hpp"
#include "cocorrect/random.hpp"
#include "cocorrect/selection.hpp"
#include "cocorrect/serialize.hpp"

namespace cocorrect {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kCheckpointMagic = 0x43434B50;  // "CCKP"
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kBatchTag = 0xDA7A;
const double kLogFloor = std::log(kLogEpsilon);

MatrixD to_double(const nn::Matrix& m) { return m.cast<double>(); }
nn::Matrix to_float(const MatrixD& m) { return m.cast<float>(); }

std::uint64_t batch_seed(const RunConfig& c) { return derive_seed(c.seed, {kBatchTag}); }

BatchStream::Options stream_options(const RunConfig& c, int epoch) {
  return {c.schedule.batch_size, batch_seed(c), epoch, true, c.dataset.augment};
}

// Learning-rate multiplier for batch `index` of `epoch`.
double warmup_scale(const nn::SgdOptions& o, int epoch, int index, int batches_per_epoch) {
  if (o.warmup_epochs <= 0 || epoch >= o.warmup_epochs) return 1.0;
  const double total = static_cast<double>(o.warmup_epochs) * batches_per_epoch;
  return (static_cast<double>(epoch) * batches_per_epoch + index + 1) / total;
}

std::vector<int> labels_of(const std::vector<int>& labels, std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(labels[id]);
  return out;
}

std::vector<int> sorted_intersection(std::vector<int> a, std::vector<int> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<int> all_rows(Eigen::Index n) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<int>(i);
  return out;
}

std::span<const double> as_span(const VectorD& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void write_network(std::ostream& out, const nn::Network& net, const nn::Sgd& opt) {
  io::write_pod(out, static_cast<std::uint64_t>(net.parameters().size()));
  io::write_span(out, net.parameters());
  io::write_span(out, opt.velocity());
}

void read_network(std::istream& in, nn::Network& net, nn::Sgd& opt) {
  const auto n = io::read_pod<std::uint64_t>(in);
  if (n != net.parameters().size()) throw LoadError("checkpoint network size does not match the configured backbone");
  io::read_span(in, net.parameters());
  std::vector<float> velocity(n);
  io::read_span(in, std::span<float>(velocity));
  opt.set_velocity(velocity);
}

void write_summary(const RunSummary& s, const fs::path& path) {
  nlohmann::json j{{"report_net", s.report_net},
                   {"final_test_acc", s.final_test_acc},
                   {"final_val_acc", s.final_val_acc},
                   {"epochs", s.history.size()}};
  if (s.final_acc_label) j["final_acc_label"] = *s.final_acc_label;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::array<std::uint64_t, 2> network_seeds(std::uint64_t run_seed) {
  return {derive_seed(run_seed, {0x4E7, 1}), derive_seed(run_seed, {0x4E7, 2})};
}

nn::Matrix gather_images(const NoisyDataset& ds, std::span<const int> ids) {
  nn::Matrix out(static_cast<Eigen::Index>(ids.size()), ds.images.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = ds.images.row(ids[i]);
  return out;
}

std::vector<int> predict_classes(nn::Network& net, const nn::Matrix& images, int chunk) {
  const nn::Matrix logits = nn::predict_logits(net, images, chunk);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < logits.cols(); ++j) {
      if (logits(i, j) > logits(i, best)) best = j;
    }
    out[i] = best;
  }
  return out;
}

double evaluate(nn::Network& net, const NoisyDataset& ds, Split split, int chunk) {
  const std::vector<int> ids = ds.ids(split);
  if (ids.empty()) return 0.0;
  return acc_class(predict_classes(net, gather_images(ds, ids), chunk), labels_of(ds.clean_labels, ids));
}

// --- DualTrainer ----------------------------------------------------------

DualTrainer::DualTrainer(RunConfig config, const NoisyDataset& ds)
    : config_(std::move(config)),
      ds_(&ds),
      nets_{nn::make_network(config_.model, ds.image_shape, ds.num_classes),
            nn::make_network(config_.model, ds.image_shape, ds.num_classes)},
      optimizers_{nn::Sgd(nets_[0].parameters().size(), config_.optimizer),
                  nn::Sgd(nets_[1].parameters().size(), config_.optimizer)},
      net_seeds_(network_seeds(config_.seed)),
      store_(ds.noisy_labels, ds.num_classes, config_.label.k, config_.label.lambda),
      train_ids_(ds.ids(Split::kTrain)),
      train_clean_(labels_of(ds.clean_labels, train_ids_)) {
  nets_[0].init(net_seeds_[0]);
  nets_[1].init(net_seeds_[1]);
}

void DualTrainer::set_net_seeds(std::uint64_t seed1, std::uint64_t seed2) {
  net_seeds_ = {seed1, seed2};
  nets_[0].init(seed1);
  nets_[1].init(seed2);
}

int DualTrainer::stage_of(int epoch) const {
  const auto& s = config_.schedule;
  if (epoch < s.stage1_epochs) return 1;
  if (epoch < s.stage1_epochs + s.stage3_epochs) return 3;
  return 4;
}

EpochStats DualTrainer::train_epoch(int epoch, Phase phase) {
  const auto& cfg = config_;
  const double beta = phase == Phase::kCorrect || (phase == Phase::kFineTune && cfg.curriculum.stage4_entropy)
                          ? cfg.label.beta
                          : 0.0;
  const double alpha = cfg.label.alpha;
  const double soft_scale = cfg.label.element_mean ? 1.0 / static_cast<double>(ds_->num_classes) : 1.0;
  EpochStats stats;
  stats.r_t = memory_rate({cfg.schedule.e_k, cfg.schedule.tau}, epoch);

  BatchStream stream(*ds_, Split::kTrain, stream_options(cfg, epoch));
  for (int index = 0;; ++index) {
    auto batch = stream.next();
    if (!batch) break;
    const double lr_scale = warmup_scale(cfg.optimizer, epoch, index, stream.num_batches());
    const std::vector<int>& ids = batch->ids;
    const std::vector<int>& labels = batch->noisy_labels;
    const auto b = static_cast<Eigen::Index>(ids.size());

    std::array<MatrixD, 2> log_pred;
    for (int m = 0; m < 2; ++m) log_pred[m] = log_softmax_rows(to_double(nets_[m].forward(batch->images)));

    MatrixD log_yd;
    if (phase != Phase::kWarmup) log_yd = store_.log_distributions(ids).cwiseMax(kLogFloor);

    std::array<VectorD, 2> loss;
    std::array<double, 3> terms{0.0, 0.0, 0.0};  // l_c, l_o, l_e summed over both nets
    for (int m = 0; m < 2; ++m) {
      if (phase == Phase::kWarmup) {
        loss[m] = ce_rows(log_pred[m], labels);
        terms[0] += loss[m].mean();
      } else {
        const VectorD kl = kl_rows(log_pred[m], log_yd);
        const VectorD entropy = entropy_rows(log_pred[m]);
        loss[m] = kl + beta * entropy;
        terms[0] += kl.mean();
        terms[2] += entropy.mean();
        if (phase == Phase::kCorrect) {
          const VectorD compat = compat_rows(labels, log_yd);
          loss[m] += alpha * compat;
          terms[1] += compat.mean();
        }
      }
    }
    if (!loss[0].allFinite() || !loss[1].allFinite()) {
      ++stats.skipped_batches;
      spdlog::warn("epoch {}: non-finite loss, batch skipped", epoch);
      continue;
    }

    const MatrixD p0 = log_pred[0].array().exp();
    const MatrixD p1 = log_pred[1].array().exp();
    const std::vector<int> agree = agreement_set(p0, p1);
    std::array<std::vector<int>, 2> selected;
    if (phase == Phase::kCorrect && !cfg.curriculum.select_in_stage3) {
      selected = {all_rows(b), all_rows(b)};
    } else {
      const auto pick = [&](int m) { return select_small_loss(as_span(loss[m]), agree, stats.r_t); };
      switch (cfg.curriculum.selection) {
        case SelectionMode::kPeer:
          selected = {pick(1), pick(0)};
          break;
        case SelectionMode::kOwn:
          selected = {pick(0), pick(1)};
          break;
        case SelectionMode::kIntersection: {
          auto both = sorted_intersection(pick(0), pick(1));
          selected = {both, both};
          break;
        }
      }
    }

    for (int m = 0; m < 2; ++m) {
      auto& rows = selected[m];
      std::sort(rows.begin(), rows.end());
      stats.selected[m] += static_cast<long>(rows.size());
      if (rows.empty()) continue;
      const MatrixD grad = phase == Phase::kWarmup ? ce_logit_gradient(log_pred[m], labels, rows)
                                                   : soft_scale * soft_logit_gradient(log_pred[m], log_yd, beta, rows);
      nets_[m].backward(to_float(grad), rows);
      optimizers_[m].step(nets_[m].parameters(), nets_[m].gradients(), lr_scale);
    }

    if (phase == Phase::kCorrect) {
      const MatrixD label_logits = store_.logits(ids);
      const MatrixD g0 = soft_scale * stage3_label_gradient(p0, label_logits, labels, alpha);
      const MatrixD g1 = soft_scale * stage3_label_gradient(p1, label_logits, labels, alpha);
      store_.apply_label_gradient(ids, g0, g1);
    }

    const auto w = static_cast<double>(b);
    stats.l_c += terms[0] / 2.0 * w;
    stats.l_o += terms[1] / 2.0 * w;
    stats.l_e += terms[2] / 2.0 * w;
    stats.agreement += static_cast<long>(agree.size());
    stats.samples += static_cast<long>(b);
    ++stats.steps;
  }
  if (stats.samples > 0) {
    const auto n = static_cast<double>(stats.samples);
    stats.l_c /= n;
    stats.l_o /= n;
    stats.l_e /= n;
  }
  return stats;
}

EpochStats DualTrainer::stage1_epoch(int epoch) { return train_epoch(epoch, Phase::kWarmup); }
EpochStats DualTrainer::stage3_epoch(int epoch) { return train_epoch(epoch, Phase::kCorrect); }

EpochStats DualTrainer::stage4_epoch(int epoch) { return train_epoch(epoch, Phase::kFineTune); }

MatrixD DualTrainer::extract_features(std::span<const int> ids) {
  const int width = nets_[0].feature_width();
  MatrixD out(static_cast<Eigen::Index>(ids.size()), 2 * width);
  const auto chunk = static_cast<std::size_t>(config_.run.eval_batch);
  // column blocks follow the seeds, not the slots, so swapping the nets
  // leaves the plan unchanged
  const int first = net_seeds_[0] <= net_seeds_[1] ? 0 : 1;
  for (std::size_t s = 0; s < ids.size(); s += chunk) {
    const auto part = ids.subspan(s, std::min(chunk, ids.size() - s));
    const nn::Matrix x = gather_images(*ds_, part);
    for (int m = 0; m < 2; ++m) {
      nets_[m].forward(x);
      out.block(static_cast<Eigen::Index>(s), (m == first ? 0 : 1) * width, static_cast<Eigen::Index>(part.size()), width) =
          nets_[m].features().cast<double>();
    }
  }
  return out;
}

const CurriculumPlan& DualTrainer::build_curriculum() {
  const auto& s = config_.schedule;
  const MatrixD features = extract_features(train_ids_);
  const std::vector<int> labels = labels_of(ds_->noisy_labels, train_ids_);
  plan_ = build_plan(features, train_ids_, labels, ds_->num_classes,
                     {config_.curriculum.k, config_.curriculum.pca_dim},
                     unlock_schedule(s.stage1_epochs, s.stage3_epochs));
  spdlog::info("curriculum: tiers {}/{}/{} unlock at epochs {}, {}, {}", plan_->ids_in_tier(1).size(),
               plan_->ids_in_tier(2).size(), plan_->ids_in_tier(3).size(), plan_->unlock_epoch[0],
               plan_->unlock_epoch[1], plan_->unlock_epoch[2]);
  return *plan_;
}

EpochStats DualTrainer::run_epoch(int epoch) {
  const int stage = stage_of(epoch);
  EpochStats stats;
  if (stage == 1) {
    stats = stage1_epoch(epoch);
  } else if (stage == 3) {
    if (!plan_) build_curriculum();
    store_.set_updatable(plan_->ids_unlocked_by(epoch));
    stats = stage3_epoch(epoch);
  } else {
    stats = stage4_epoch(epoch);
  }
  next_epoch_ = epoch + 1;
  return stats;
}

MetricsRecord DualTrainer::evaluate_epoch(int epoch, const EpochStats& stats, double seconds) {
  MetricsRecord r;
  r.epoch = epoch;
  r.stage = stage_of(epoch);
  const int chunk = config_.run.eval_batch;
  const bool has_val = ds_->count(Split::kValidation) > 0;
  std::array<double, 2> test{};
  std::array<double, 2> val{};
  for (int m = 0; m < 2; ++m) {
    test[m] = evaluate(nets_[m], *ds_, Split::kTest, chunk);
    val[m] = has_val ? evaluate(nets_[m], *ds_, Split::kValidation, chunk) : test[m];
  }
  r.acc_test_net1 = test[0];
  r.acc_test_net2 = test[1];
  r.acc_val_net1 = val[0];
  r.acc_val_net2 = val[1];
  r.acc_label = acc_label(labels_of(store_.hard_labels(), train_ids_), train_clean_);
  r.l_c = stats.l_c;
  if (r.stage == 3) r.l_o = stats.l_o;
  if (r.stage == 3 || (r.stage == 4 && config_.curriculum.stage4_entropy)) r.l_e = stats.l_e;
  r.r_t = stats.r_t;
  r.unlocked = store_.unlocked_count();
  r.dirty = store_.dirty_count();
  r.seconds = seconds;
  return r;
}

void DualTrainer::save_checkpoint(const fs::path& path) const {
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + tmp.string());
    io::write_pod(out, kCheckpointMagic);
    io::write_pod(out, kCheckpointVersion);
    io::write_pod(out, std::uint8_t{2});
    io::write_pod(out, static_cast<std::int64_t>(next_epoch_));
    io::write_pod(out, net_seeds_);
    for (int m = 0; m < 2; ++m) write_network(out, nets_[m], optimizers_[m]);
    store_.write(out);
    io::write_pod(out, static_cast<std::uint8_t>(plan_ ? 1 : 0));
    if (plan_) write_plan(out, *plan_);
    if (!out) throw RuntimeFailure("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void DualTrainer::load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  if (io::read_pod<std::uint32_t>(in) != kCheckpointMagic) throw LoadError("not a checkpoint: " + path.string());
  if (io::read_pod<std::uint32_t>(in) != kCheckpointVersion) throw LoadError("unsupported checkpoint version");
  if (io::read_pod<std::uint8_t>(in) != 2) throw LoadError("checkpoint holds a single network: " + path.string());
  next_epoch_ = static_cast<int>(io::read_pod<std::int64_t>(in));
  net_seeds_ = io::read_pod<std::array<std::uint64_t, 2>>(in);
  for (int m = 0; m < 2; ++m) read_network(in, nets_[m], optimizers_[m]);
  LabelStore store = LabelStore::read(in);
  if (store.size() != ds_->size() || store.num_classes() != ds_->num_classes) {
    throw LoadError("checkpoint label store does not match the dataset");
  }
  store_ = std::move(store);
  if (io::read_pod<std::uint8_t>(in) != 0) {
    plan_ = read_plan(in);
  } else {
    plan_.reset();
  }
}

RunSummary DualTrainer::run(const std::optional<fs::path>& run_dir) {
  std::optional<MetricsWriter> writer;
  const fs::path ckpt = run_dir ? *run_dir / "checkpoint.bin" : fs::path();
  if (run_dir) {
    fs::create_directories(*run_dir);
    if (config_.run.resume && fs::exists(ckpt)) {
      load_checkpoint(ckpt);
      spdlog::info("resuming from epoch {}", next_epoch_);
      writer.emplace(*run_dir / "metrics.csv", next_epoch_);
    } else {
      writer.emplace(*run_dir / "metrics.csv");
    }
  }
  RunSummary summary;
  if (run_dir && next_epoch_ > 0) summary.history = read_metrics(*run_dir / "metrics.csv");
  const int epochs = config_.schedule.epochs;
  for (int e = next_epoch_; e < epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool had_plan = plan_.has_value();
    const EpochStats stats = run_epoch(e);
    MetricsRecord row = evaluate_epoch(e, stats, 0.0);
    row.seconds = config_.run.record_wall_time ? seconds_since(t0) : 0.0;
    spdlog::info("epoch {:3d} stage {} acc {:.4f}/{:.4f} label {:.4f} l_c {:.4f} R {:.3f} unlocked {} sel {}/{}",
                 e, row.stage, row.acc_test_net1, row.acc_test_net2.value_or(0), row.acc_label.value_or(0), row.l_c,
                 row.r_t, row.unlocked.value_or(0), stats.selected[0], stats.selected[1]);
    summary.history.push_back(row);
    if (writer) writer->append(row);
    if (run_dir && !had_plan && plan_) write_plan_csv(*plan_, *run_dir / "curriculum.csv");
    if (run_dir && config_.run.checkpoint_every > 0 &&
        ((e + 1) % config_.run.checkpoint_every == 0 || e + 1 == epochs)) {
      save_checkpoint(ckpt);
    }
  }
  if (!summary.history.empty()) {
    const auto& last = summary.history.back();
    const bool second = last.acc_val_net2 && *last.acc_val_net2 > last.acc_val_net1;
    summary.report_net = second ? 2 : 1;
    summary.final_test_acc = second ? *last.acc_test_net2 : last.acc_test_net1;
    summary.final_val_acc = second ? *last.acc_val_net2 : last.acc_val_net1;
    summary.final_acc_label = last.acc_label;
  }
  if (run_dir) {
    store_.save(*run_dir / "labels.bin", next_epoch_);
    write_summary(summary, *run_dir / "summary.json");
  }
  return summary;
}

// --- StandardTrainer ------------------------------------------------------

StandardTrainer::StandardTrainer(RunConfig config, const NoisyDataset& ds)
    : config_(std::move(config)),
      ds_(&ds),
      net_(nn::make_network(config_.model, ds.image_shape, ds.num_classes)),
      optimizer_(net_.parameters().size(), config_.optimizer) {
  net_.init(network_seeds(config_.seed)[0]);
}

EpochStats StandardTrainer::train_epoch(int epoch) {
  EpochStats stats;
  BatchStream stream(*ds_, Split::kTrain, stream_options(config_, epoch));
  for (int index = 0;; ++index) {
    auto batch = stream.next();
    if (!batch) break;
    const double lr_scale = warmup_scale(config_.optimizer, epoch, index, stream.num_batches());
    const auto b = static_cast<Eigen::Index>(batch->ids.size());
    const MatrixD log_pred = log_softmax_rows(to_double(net_.forward(batch->images)));
    const VectorD loss = ce_rows(log_pred, batch->noisy_labels);
    if (!loss.allFinite()) {
      ++stats.skipped_batches;
      spdlog::warn("epoch {}: non-finite loss, batch skipped", epoch);
      continue;
    }
    const std::vector<int> rows = all_rows(b);
    net_.backward(to_float(ce_logit_gradient(log_pred, batch->noisy_labels, rows)), rows);
    optimizer_.step(net_.parameters(), net_.gradients(), lr_scale);
    stats.l_c += loss.sum();
    stats.samples += static_cast<long>(b);
    stats.selected[0] += static_cast<long>(b);
    ++stats.steps;
  }
  if (stats.samples > 0) stats.l_c /= static_cast<double>(stats.samples);
  next_epoch_ = epoch + 1;
  return stats;
}

MetricsRecord StandardTrainer::evaluate_epoch(int epoch, const EpochStats& stats, double seconds) {
  MetricsRecord r;
  r.epoch = epoch;
  r.stage = 0;
  const int chunk = config_.run.eval_batch;
  r.acc_test_net1 = evaluate(net_, *ds_, Split::kTest, chunk);
  r.acc_val_net1 = ds_->count(Split::kValidation) > 0 ? evaluate(net_, *ds_, Split::kValidation, chunk)
                                                      : r.acc_test_net1;
  r.l_c = stats.l_c;
  r.r_t = 1.0;
  r.seconds = seconds;
  return r;
}

void StandardTrainer::save_checkpoint(const fs::path& path) const {
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + tmp.string());
    io::write_pod(out, kCheckpointMagic);
    io::write_pod(out, kCheckpointVersion);
    io::write_pod(out, std::uint8_t{1});
    io::write_pod(out, static_cast<std::int64_t>(next_epoch_));
    write_network(out, net_, optimizer_);
  }
  fs::rename(tmp, path);
}

void StandardTrainer::load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  if (io::read_pod<std::uint32_t>(in) != kCheckpointMagic) throw LoadError("not a checkpoint: " + path.string());
  if (io::read_pod<std::uint32_t>(in) != kCheckpointVersion) throw LoadError("unsupported checkpoint version");
  if (io::read_pod<std::uint8_t>(in) != 1) throw LoadError("checkpoint holds two networks: " + path.string());
  next_epoch_ = static_cast<int>(io::read_pod<std::int64_t>(in));
  read_network(in, net_, optimizer_);
}

RunSummary StandardTrainer::run(const std::optional<fs::path>& run_dir) {
  std::optional<MetricsWriter> writer;
  const fs::path ckpt = run_dir ? *run_dir / "checkpoint.bin" : fs::path();
  if (run_dir) {
    fs::create_directories(*run_dir);
    if (config_.run.resume && fs::exists(ckpt)) {
      load_checkpoint(ckpt);
      writer.emplace(*run_dir / "metrics.csv", next_epoch_);
    } else {
      writer.emplace(*run_dir / "metrics.csv");
    }
  }
  RunSummary summary;
  if (run_dir && next_epoch_ > 0) summary.history = read_metrics(*run_dir / "metrics.csv");
  const int epochs = config_.schedule.epochs;
  for (int e = next_epoch_; e < epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochStats stats = train_epoch(e);
    MetricsRecord row = evaluate_epoch(e, stats, 0.0);
    row.seconds = config_.run.record_wall_time ? seconds_since(t0) : 0.0;
    spdlog::info("epoch {:3d} standard acc {:.4f} l_c {:.4f}", e, row.acc_test_net1, row.l_c);
    summary.history.push_back(row);
    if (writer) writer->append(row);
    if (run_dir && config_.run.checkpoint_every > 0 &&
        ((e + 1) % config_.run.checkpoint_every == 0 || e + 1 == epochs)) {
      save_checkpoint(ckpt);
    }
  }
  if (!summary.history.empty()) {
    summary.final_test_acc = summary.history.back().acc_test_net1;
    summary.final_val_acc = summary.history.back().acc_val_net1;
  }
  if (run_dir) write_summary(summary, *run_dir / "summary.json");
  return summary;
}

RunSummary standard_baseline(const RunConfig& config, const NoisyDataset& ds, const std::optional<fs::path>& run_dir) {
  StandardTrainer trainer(config, ds);
  return trainer.run(run_dir);
}

RunSummary run_experiment(const RunConfig& config, const NoisyDataset& ds, const fs::path& run_dir) {
  fs::create_directories(run_dir);
  write_resolved_config(config, run_dir / "config.resolved");
  write_noise_manifest(ds, run_dir / "noise_manifest.csv");
  if (config.method == Method::kStandard) return standard_baseline(config, ds, run_dir);
  DualTrainer trainer(config, ds);
  return trainer.run(run_dir);
}

}  // namespace cocorrect
