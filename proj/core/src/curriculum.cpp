#include "cocorrect/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "cocorrect/errors.hpp"
#include "cocorrect/serialize.hpp"

namespace cocorrect {

PcaModel fit_pca(const MatrixD& x, int d) {
  if (d < 1 || d > x.cols()) {
    throw ConfigError("PCA dimension " + std::to_string(d) + " must be in [1, " + std::to_string(x.cols()) + "]");
  }
  if (x.rows() < 1) throw std::invalid_argument("fit_pca: no samples");
  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const MatrixD centered = x.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw RuntimeFailure("PCA eigen decomposition failed");
  const Eigen::Index width = x.cols();
  model.components.resize(d, width);
  model.variances.resize(d);
  const VectorD& values = solver.eigenvalues();  // ascending
  for (int k = 0; k < d; ++k) {
    const Eigen::Index src = width - 1 - k;
    Eigen::RowVectorXd axis = solver.eigenvectors().col(src).transpose();
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis[big] < 0) axis = -axis;
    model.components.row(k) = axis;
    model.variances[k] = std::max(values[src], 0.0);
  }
  const double total = values.cwiseMax(0.0).sum();
  model.explained_variance = total > 0.0 ? std::min(1.0, model.variances.sum() / total) : 1.0;
  return model;
}

MatrixD pca_transform(const PcaModel& model, const MatrixD& x) {
  if (x.cols() != model.mean.size()) throw std::invalid_argument("pca_transform: width mismatch");
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

MatrixD distance_matrix(const MatrixD& features) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  MatrixD out = MatrixD::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* a = features.row(i).data();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* b = features.row(j).data();
      double sum = 0.0;
      for (Eigen::Index t = 0; t < d; ++t) {
        const double diff = a[t] - b[t];
        sum += diff * diff;
      }
      out(i, j) = out(j, i) = std::sqrt(sum);
    }
  }
  return out;
}

double cutoff_distance(std::vector<double> pair_distances, double k) {
  if (!(k > 0.0 && k <= 100.0)) throw std::invalid_argument("cutoff_distance: k must be in (0, 100]");
  if (pair_distances.empty()) throw std::invalid_argument("cutoff_distance: no pairs");
  std::sort(pair_distances.begin(), pair_distances.end());
  const double m = static_cast<double>(pair_distances.size());
  auto rank = static_cast<std::size_t>(std::ceil(k / 100.0 * m - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, pair_distances.size());
  return pair_distances[rank - 1];
}

double cutoff_distance(const MatrixD& distances, double k) {
  std::vector<double> pairs;
  const Eigen::Index n = distances.rows();
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.push_back(distances(i, j));
  }
  return cutoff_distance(std::move(pairs), k);
}

std::vector<int> densities(const MatrixD& distances, double d_c) {
  const Eigen::Index n = distances.rows();
  std::vector<int> s(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && distances(i, j) < d_c) ++s[i];
    }
  }
  return s;
}

VectorD peak_distances(const MatrixD& distances, std::span<const int> s) {
  const Eigen::Index n = distances.rows();
  VectorD eps(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    double row_max = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row_max = std::max(row_max, distances(i, j));
      if (s[j] > s[i]) best = std::min(best, distances(i, j));
    }
    eps[i] = std::isinf(best) ? row_max : best;
  }
  return eps;
}

std::vector<int> assign_tiers(std::span<const double> eps, std::span<const int> s) {
  const std::size_t n = eps.size();
  std::vector<int> tiers(n, 1);
  if (n < 3) return tiers;
  std::vector<char> peak(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (s[j] > s[i]) {
        peak[i] = 0;
        break;
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (peak[a] != peak[b]) return peak[a] > peak[b];
    if (peak[a] != 0) return a < b;
    if (eps[a] != eps[b]) return eps[a] < eps[b];
    return a < b;
  });
  std::size_t pos = 0;
  for (int t = 0; t < 3; ++t) {
    const std::size_t size = n / 3 + (static_cast<std::size_t>(t) < n % 3 ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) tiers[order[pos++]] = t + 1;
  }
  return tiers;
}

std::array<int, 3> unlock_schedule(int start, int length) {
  std::array<int, 3> out{};
  for (int t = 0; t < 3; ++t) {
    out[t] = start + (t * std::max(length, 0)) / 3;
    if (t > 0 && out[t] <= out[t - 1]) out[t] = out[t - 1] + 1;
  }
  return out;
}

CurriculumPlan build_plan(const MatrixD& features, std::span<const int> ids, std::span<const int> labels,
                          int num_classes, const CurriculumOptions& options,
                          std::array<int, 3> unlock_epoch) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  if (features.rows() != n || static_cast<Eigen::Index>(labels.size()) != n) {
    throw std::invalid_argument("build_plan: features, ids and labels disagree in length");
  }
  CurriculumPlan plan;
  plan.ids.assign(ids.begin(), ids.end());
  plan.labels.assign(labels.begin(), labels.end());
  plan.tier.assign(ids.size(), 1);
  plan.density.assign(ids.size(), 0);
  plan.eps.assign(ids.size(), 0.0);
  plan.class_cutoff.assign(static_cast<std::size_t>(num_classes), std::numeric_limits<double>::quiet_NaN());
  plan.unlock_epoch = unlock_epoch;
  if (n == 0) return plan;

  const PcaModel pca = fit_pca(features, options.pca_dim);
  plan.features = pca_transform(pca, features);
  plan.explained_variance = pca.explained_variance;
  spdlog::info("curriculum: PCA to {} dims keeps {:.4f} of the variance", options.pca_dim,
               pca.explained_variance);

  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[i] == c) rows.push_back(static_cast<int>(i));
    }
    if (rows.size() < 3) {
      if (!rows.empty()) spdlog::warn("curriculum: class {} has {} samples, all placed in tier 1", c, rows.size());
      continue;
    }
    MatrixD class_features(static_cast<Eigen::Index>(rows.size()), plan.features.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      class_features.row(static_cast<Eigen::Index>(r)) = plan.features.row(rows[r]);
    }
    const MatrixD d = distance_matrix(class_features);
    const double d_c = cutoff_distance(d, options.k);
    const std::vector<int> s = densities(d, d_c);
    const VectorD eps = peak_distances(d, s);
    const std::vector<int> tiers =
        assign_tiers(std::span<const double>(eps.data(), static_cast<std::size_t>(eps.size())), s);
    plan.class_cutoff[c] = d_c;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      plan.tier[rows[r]] = tiers[r];
      plan.density[rows[r]] = s[r];
      plan.eps[rows[r]] = eps[static_cast<Eigen::Index>(r)];
    }
  }
  return plan;
}

std::vector<int> CurriculumPlan::ids_in_tier(int t) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (tier[i] == t) out.push_back(ids[i]);
  }
  return out;
}

std::vector<int> CurriculumPlan::ids_unlocked_by(int epoch) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (unlock_epoch[tier[i] - 1] <= epoch) out.push_back(ids[i]);
  }
  return out;
}

int CurriculumPlan::unlocked_count(int epoch) const { return static_cast<int>(ids_unlocked_by(epoch).size()); }

void write_plan_csv(const CurriculumPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(17);
  out << "id,class,s,eps,tier,unlock_epoch\n";
  for (std::size_t i = 0; i < plan.ids.size(); ++i) {
    out << plan.ids[i] << ',' << plan.labels[i] << ',' << plan.density[i] << ',' << plan.eps[i] << ','
        << plan.tier[i] << ',' << plan.unlock_epoch[plan.tier[i] - 1] << '\n';
  }
}

void write_plan(std::ostream& out, const CurriculumPlan& plan) {
  io::write_vector(out, plan.ids);
  io::write_vector(out, plan.labels);
  io::write_vector(out, plan.tier);
  io::write_vector(out, plan.density);
  io::write_vector(out, plan.eps);
  io::write_vector(out, plan.class_cutoff);
  io::write_pod(out, plan.unlock_epoch);
  io::write_pod(out, plan.explained_variance);
}

CurriculumPlan read_plan(std::istream& in) {
  CurriculumPlan plan;
  plan.ids = io::read_vector<int>(in);
  plan.labels = io::read_vector<int>(in);
  plan.tier = io::read_vector<int>(in);
  plan.density = io::read_vector<int>(in);
  plan.eps = io::read_vector<double>(in);
  plan.class_cutoff = io::read_vector<double>(in);
  plan.unlock_epoch = io::read_pod<std::array<int, 3>>(in);
  plan.explained_variance = io::read_pod<double>(in);
  const std::size_t n = plan.ids.size();
  if (plan.labels.size() != n || plan.tier.size() != n || plan.density.size() != n || plan.eps.size() != n) {
    throw LoadError("inconsistent curriculum plan stream");
  }
  return plan;
}

}  // namespace cocorrect
