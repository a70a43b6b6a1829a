#pragma once

// Sample selection shared by both networks: the memory-rate schedule, the
// agreement set and small-loss filtering.

#include <span>
#include <vector>

#include "cocorrect/losses.hpp"

namespace cocorrect {

struct MemorySchedule {
  int e_k = 10;
  double tau = 0.0;
};

// R(e) = 1 - min(e / E_k * tau, tau) for the 0-based epoch e.
double memory_rate(const MemorySchedule& schedule, int epoch);

// Row positions where both prediction matrices share the same argmax.
std::vector<int> agreement_set(const MatrixD& pred1, const MatrixD& pred2);

// Keeps the ceil(rate * |candidates|) candidates with the smallest loss,
// ordered by loss ascending then by candidate value. `losses` is indexed by
// candidate value (batch position).
std::vector<int> select_small_loss(std::span<const double> losses, std::span<const int> candidates,
                                   double rate);

// Overload for losses given in candidate order: losses[i] belongs to id i.
std::vector<int> select_small_loss(std::span<const double> losses, double rate);

enum class SelectionMode { kPeer, kOwn, kIntersection };

}  // namespace cocorrect
