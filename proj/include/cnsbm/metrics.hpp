#pragma once

#include <cmath>
#include <vector>

#include "cnsbm/matrix.hpp"
#include "cnsbm/state.hpp"

namespace cnsbm {

struct BlockDistributions {
  int K = 0, L = 0, n_cat = 0;
  std::vector<double> probs;  // K * L * n_cat

  double at(int k, int l, int c) const {
    return probs[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }
  double& at(int k, int l, int c) {
    return probs[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }
};

// Per-block empirical category frequencies over observed cells; empty blocks
// fall back to the uniform distribution.
inline BlockDistributions empirical_blocks(const CategoricalMatrix& data,
                                           const HardAssignments& hard, int K, int L) {
  BlockDistributions blocks;
  blocks.K = K;
  blocks.L = L;
  blocks.n_cat = data.n_cat;
  blocks.probs.assign(static_cast<std::size_t>(K) * L * data.n_cat, 0.0);
  for (int i = 0; i < data.n_rows; ++i)
    for (int j = 0; j < data.n_cols; ++j)
      if (data.observed(i, j)) blocks.at(hard.g[i], hard.h[j], data.code(i, j)) += 1.0;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      double total = 0.0;
      for (int c = 0; c < data.n_cat; ++c) total += blocks.at(k, l, c);
      if (total > 0.0) {
        for (int c = 0; c < data.n_cat; ++c) blocks.at(k, l, c) /= total;
      } else {
        for (int c = 0; c < data.n_cat; ++c) blocks.at(k, l, c) = 1.0 / data.n_cat;
      }
    }
  }
  return blocks;
}

// Sum over held-out cells of log block probability, floored at 1e-10.
inline double heldout_loglik(const HoldoutSplit& split, const HardAssignments& hard,
                             const BlockDistributions& blocks) {
  double acc = 0.0;
  for (const auto& cell : split.heldout) {
    const double p = blocks.at(hard.g[cell.row], hard.h[cell.col], cell.true_code);
    acc += std::log(std::max(p, 1e-10));
  }
  return acc;
}

inline double heldout_accuracy(const HoldoutSplit& split, const HardAssignments& hard,
                               const BlockDistributions& blocks) {
  if (split.heldout.empty()) throw DomainError("heldout_accuracy: empty held-out set");
  std::size_t correct = 0;
  for (const auto& cell : split.heldout) {
    const int k = hard.g[cell.row], l = hard.h[cell.col];
    const int pred = detail::argmax_lowest(blocks.n_cat, [&](int c) { return blocks.at(k, l, c); });
    if (pred == cell.true_code) ++correct;
  }
  return static_cast<double>(correct) / split.heldout.size();
}

// Average normalized Shannon entropy of the empirical block distributions,
// weighted by each block's observed-cell count.
inline double weighted_entropy(const CategoricalMatrix& data, const HardAssignments& hard, int K,
                               int L) {
  std::vector<double> counts(static_cast<std::size_t>(K) * L, 0.0);
  const auto blocks = empirical_blocks(data, hard, K, L);
  for (int i = 0; i < data.n_rows; ++i)
    for (int j = 0; j < data.n_cols; ++j)
      if (data.observed(i, j)) counts[static_cast<std::size_t>(hard.g[i]) * L + hard.h[j]] += 1.0;
  double total = 0.0;
  for (double c : counts) total += c;
  if (total == 0.0) throw DomainError("weighted_entropy: no observed cells");

  const double log_ncat = std::log(static_cast<double>(data.n_cat));
  double acc = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      const double weight = counts[static_cast<std::size_t>(k) * L + l] / total;
      if (weight == 0.0) continue;
      double entropy = 0.0;
      for (int c = 0; c < data.n_cat; ++c) {
        const double p = blocks.at(k, l, c);
        if (p > 0.0) entropy -= p * std::log(p);
      }
      acc += weight * entropy / log_ncat;
    }
  }
  return acc;
}

// Standard pair-counting adjusted Rand index.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ShapeError("adjusted_rand_index: label length mismatch");
  const std::size_t n = a.size();
  int ka = 0, kb = 0;
  for (int v : a) ka = std::max(ka, v + 1);
  for (int v : b) kb = std::max(kb, v + 1);
  std::vector<double> table(static_cast<std::size_t>(ka) * kb, 0.0);
  std::vector<double> row_sums(ka, 0.0), col_sums(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    table[static_cast<std::size_t>(a[i]) * kb + b[i]] += 1.0;
    row_sums[a[i]] += 1.0;
    col_sums[b[i]] += 1.0;
  }
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (double v : table) index += choose2(v);
  double sum_a = 0.0, sum_b = 0.0;
  for (double v : row_sums) sum_a += choose2(v);
  for (double v : col_sums) sum_b += choose2(v);
  const double expected = sum_a * sum_b / choose2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return max_index == 0.0 ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace cnsbm
