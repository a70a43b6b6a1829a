#include "cocorrect/label_store.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "cocorrect/errors.hpp"
#include "cocorrect/serialize.hpp"

namespace cocorrect {

namespace {
constexpr std::uint32_t kStoreMagic = 0x4C53544F;  // "LSTO"
}

LabelStore::LabelStore(std::span<const int> noisy_labels, int num_classes, double k, double lambda)
    : logits_(MatrixD::Zero(static_cast<Eigen::Index>(noisy_labels.size()), num_classes)),
      k_(k),
      lambda_(lambda),
      initial_(noisy_labels.begin(), noisy_labels.end()),
      updatable_(noisy_labels.size(), 0),
      dirty_(noisy_labels.size(), 0) {
  if (num_classes < 1) throw std::invalid_argument("label store: need at least one class");
  if (!(k >= 0.0) || !std::isfinite(k)) throw std::invalid_argument("label store: K must be >= 0");
  for (std::size_t i = 0; i < noisy_labels.size(); ++i) {
    const int y = noisy_labels[i];
    if (y < 0 || y >= num_classes) {
      throw std::invalid_argument("label store: label " + std::to_string(y) + " out of range at id " +
                                  std::to_string(i));
    }
    logits_(static_cast<Eigen::Index>(i), y) = k;
  }
}

LabelStore init_store(std::span<const int> noisy_labels, int num_classes, double k, double lambda) {
  return {noisy_labels, num_classes, k, lambda};
}

MatrixD LabelStore::logits(std::span<const int> ids) const {
  MatrixD out(static_cast<Eigen::Index>(ids.size()), logits_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = logits_.row(ids[i]);
  return out;
}

MatrixD LabelStore::distributions(std::span<const int> ids) const { return softmax_rows(logits(ids)); }

MatrixD LabelStore::log_distributions(std::span<const int> ids) const {
  return log_softmax_rows(logits(ids));
}

std::vector<int> LabelStore::hard_labels() const {
  std::vector<int> out(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) out[i] = argmax(logits_.row(i));
  return out;
}

void LabelStore::set_updatable(std::span<const int> ids, bool updatable) {
  for (int id : ids) updatable_.at(static_cast<std::size_t>(id)) = updatable ? 1 : 0;
}

int LabelStore::unlocked_count() const {
  int n = 0;
  for (auto u : updatable_) n += u;
  return n;
}

int LabelStore::apply_label_gradient(std::span<const int> ids, const MatrixD& grad1,
                                     const MatrixD& grad2) {
  const auto b = static_cast<Eigen::Index>(ids.size());
  if (grad1.rows() != b || grad2.rows() != b || grad1.cols() != logits_.cols() ||
      grad2.cols() != logits_.cols()) {
    throw std::invalid_argument("apply_label_gradient: gradient shape mismatch");
  }
  int skipped = 0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int id = ids[static_cast<std::size_t>(i)];
    if (updatable_.at(static_cast<std::size_t>(id)) == 0) continue;
    const Eigen::RowVectorXd step = grad1.row(i) + grad2.row(i);
    if (!step.allFinite()) {
      ++skipped;
      continue;
    }
    logits_.row(id) -= lambda_ * step;
    if (argmax(logits_.row(id)) != initial_[id]) dirty_[id] = 1;
  }
  if (skipped > 0) {
    skipped_ += skipped;
    spdlog::warn("label store: skipped {} rows with non-finite gradients", skipped);
  }
  return skipped;
}

int LabelStore::dirty_count() const {
  int n = 0;
  for (auto d : dirty_) n += d;
  return n;
}

void LabelStore::write(std::ostream& out) const {
  io::write_pod(out, kStoreMagic);
  io::write_pod(out, static_cast<std::int64_t>(size()));
  io::write_pod(out, static_cast<std::int64_t>(num_classes()));
  io::write_pod(out, k_);
  io::write_pod(out, lambda_);
  io::write_span(out, std::span<const double>(logits_.data(), static_cast<std::size_t>(logits_.size())));
  io::write_vector(out, initial_);
  io::write_vector(out, updatable_);
  io::write_vector(out, dirty_);
  io::write_pod(out, static_cast<std::int64_t>(skipped_));
}

LabelStore LabelStore::read(std::istream& in) {
  if (io::read_pod<std::uint32_t>(in) != kStoreMagic) throw LoadError("not a label store stream");
  LabelStore s;
  const auto n = io::read_pod<std::int64_t>(in);
  const auto c = io::read_pod<std::int64_t>(in);
  s.k_ = io::read_pod<double>(in);
  s.lambda_ = io::read_pod<double>(in);
  s.logits_.resize(n, c);
  io::read_span(in, std::span<double>(s.logits_.data(), static_cast<std::size_t>(s.logits_.size())));
  s.initial_ = io::read_vector<int>(in);
  s.updatable_ = io::read_vector<std::uint8_t>(in);
  s.dirty_ = io::read_vector<std::uint8_t>(in);
  s.skipped_ = static_cast<int>(io::read_pod<std::int64_t>(in));
  if (static_cast<std::int64_t>(s.initial_.size()) != n || s.updatable_.size() != s.initial_.size() ||
      s.dirty_.size() != s.initial_.size()) {
    throw LoadError("inconsistent label store stream");
  }
  return s;
}

void LabelStore::save(const std::filesystem::path& path, int epoch) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  io::write_pod(out, static_cast<std::int64_t>(epoch));
  write(out);
}

LabelStore LabelStore::load(const std::filesystem::path& path, int* epoch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  const auto e = io::read_pod<std::int64_t>(in);
  if (epoch != nullptr) *epoch = static_cast<int>(e);
  return read(in);
}

void LabelStore::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(17);
  out << "id";
  for (int j = 0; j < num_classes(); ++j) out << ",label_" << j;
  out << ",updatable\n";
  for (int i = 0; i < size(); ++i) {
    out << i;
    for (int j = 0; j < num_classes(); ++j) out << ',' << logits_(i, j);
    out << ',' << static_cast<int>(updatable_[i]) << '\n';
  }
}

bool operator==(const LabelStore& a, const LabelStore& b) {
  return a.k_ == b.k_ && a.lambda_ == b.lambda_ && a.logits_.rows() == b.logits_.rows() &&
         a.logits_.cols() == b.logits_.cols() && a.logits_ == b.logits_ && a.initial_ == b.initial_ &&
         a.updatable_ == b.updatable_;
}

}  // namespace cocorrect
