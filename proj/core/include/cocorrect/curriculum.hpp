#pragma once

// Density-peak curriculum over per-sample features. Within each class the
// samples are ranked by their distance to the nearest denser neighbour and
// split into three tiers that unlock label correction in turn.

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "cocorrect/losses.hpp"

namespace cocorrect {

struct PcaModel {
  VectorD mean;
  MatrixD components;  // d x width, rows are unit principal axes
  VectorD variances;   // per component, descending
  double explained_variance = 1.0;
};

// Fits the top-d principal axes. Axis signs are fixed so the largest-magnitude
// loading is positive.
PcaModel fit_pca(const MatrixD& x, int d);
MatrixD pca_transform(const PcaModel& model, const MatrixD& x);

// Euclidean distances between rows; symmetric with a zero diagonal.
MatrixD distance_matrix(const MatrixD& features);

// Value at 1-based rank ceil(k/100 * M) of the sorted unordered pair distances.
double cutoff_distance(std::vector<double> pair_distances, double k);
double cutoff_distance(const MatrixD& distances, double k);

// s_i = #{j != i : D_ij < d_c}
std::vector<int> densities(const MatrixD& distances, double d_c);

// eps_i = min D_ij over j with s_j > s_i, or max_j D_ij when no such j exists.
VectorD peak_distances(const MatrixD& distances, std::span<const int> s);

// Tiers 1..3 for one class. Samples with no denser neighbour come first (by
// position), the rest follow by eps ascending then position; the ordering is
// cut into thirds with earlier tiers taking the remainder. Classes with fewer
// than 3 samples are all tier 1.
std::vector<int> assign_tiers(std::span<const double> eps, std::span<const int> s);

struct CurriculumOptions {
  double k = 60.0;
  int pca_dim = 128;
};

struct CurriculumPlan {
  std::vector<int> ids;     // train ids, ascending
  std::vector<int> labels;  // class used for grouping (the noisy label)
  std::vector<int> tier;
  std::vector<int> density;
  std::vector<double> eps;
  std::vector<double> class_cutoff;  // d_c per class, NaN for classes without pairs
  std::array<int, 3> unlock_epoch{};
  double explained_variance = 1.0;
  MatrixD features;

  [[nodiscard]] std::vector<int> ids_in_tier(int t) const;
  [[nodiscard]] std::vector<int> ids_unlocked_by(int epoch) const;
  [[nodiscard]] int unlocked_count(int epoch) const;
};

// Evenly spaced unlock epochs over a Stage III starting at global epoch
// `start` and lasting `length` epochs, strictly increasing.
std::array<int, 3> unlock_schedule(int start, int length);

// `features` has one row per entry of `ids` (already concatenated across
// networks); PCA is fit on these rows.
CurriculumPlan build_plan(const MatrixD& features, std::span<const int> ids, std::span<const int> labels,
                          int num_classes, const CurriculumOptions& options,
                          std::array<int, 3> unlock_epoch);

// id,class,s,eps,tier,unlock_epoch
void write_plan_csv(const CurriculumPlan& plan, const std::filesystem::path& path);

void write_plan(std::ostream& out, const CurriculumPlan& plan);
CurriculumPlan read_plan(std::istream& in);

}  // namespace cocorrect
