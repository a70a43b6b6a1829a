#include "cocorrect/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cocorrect {

double memory_rate(const MemorySchedule& schedule, int epoch) {
  if (epoch < 0) throw std::invalid_argument("memory_rate: negative epoch");
  if (schedule.e_k <= 0) throw std::invalid_argument("memory_rate: E_k must be positive");
  const double ramp = static_cast<double>(epoch) / static_cast<double>(schedule.e_k) * schedule.tau;
  return 1.0 - std::min(ramp, schedule.tau);
}

std::vector<int> agreement_set(const MatrixD& pred1, const MatrixD& pred2) {
  if (pred1.rows() != pred2.rows() || pred1.cols() != pred2.cols()) {
    throw std::invalid_argument("agreement_set: shape mismatch");
  }
  std::vector<int> out;
  for (Eigen::Index i = 0; i < pred1.rows(); ++i) {
    if (argmax(pred1.row(i)) == argmax(pred2.row(i))) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> select_small_loss(std::span<const double> losses, std::span<const int> candidates,
                                   double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("select_small_loss: rate must be in (0, 1]");
  std::vector<int> order(candidates.begin(), candidates.end());
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (losses[a] != losses[b]) return losses[a] < losses[b];
    return a < b;
  });
  // Tolerance guards against rate * n landing a hair above an integer.
  const auto keep = static_cast<std::size_t>(std::ceil(rate * static_cast<double>(order.size()) - 1e-9));
  order.resize(std::min(keep, order.size()));
  return order;
}

std::vector<int> select_small_loss(std::span<const double> losses, double rate) {
  std::vector<int> ids(losses.size());
  std::iota(ids.begin(), ids.end(), 0);
  return select_small_loss(losses, ids, rate);
}

}  // namespace cocorrect
