#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cnsbm/matrix.hpp"

namespace cnsbm {

// Ground truth of a planted block-model instance.
struct PlantedTruth {
  int K = 0, L = 0, n_cat = 0;
  std::vector<int> row_labels;
  std::vector<int> col_labels;
  std::vector<double> block_dist;  // K * L * n_cat

  double at(int k, int l, int c) const {
    return block_dist[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }
  double& at(int k, int l, int c) {
    return block_dist[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }

  // exact data log-likelihood over observed cells under the planted model
  double loglik(const CategoricalMatrix& data) const {
    double acc = 0.0;
    for (int i = 0; i < data.n_rows; ++i)
      for (int j = 0; j < data.n_cols; ++j)
        if (data.observed(i, j))
          acc += std::log(at(row_labels[i], col_labels[j], data.code(i, j)));
    return acc;
  }
};

// Samples exactly from the generative process: uniform labels (patched so
// every cluster is realized), one modal code per block carrying mass
// `sharpness`, remainder spread uniformly.
inline std::pair<CategoricalMatrix, PlantedTruth> sample_block_model(int N, int M, int K, int L,
                                                                     int n_cat, double sharpness,
                                                                     std::uint64_t seed) {
  if (K > N || L > M) throw DomainError("sample_block_model: K <= N and L <= M required");
  if (n_cat < 2) throw DomainError("sample_block_model: n_cat must be >= 2");
  if (!(sharpness > 0.0 && sharpness <= 1.0))
    throw DomainError("sample_block_model: sharpness must lie in (0, 1]");
  Rng rng(seed);

  PlantedTruth truth;
  truth.K = K;
  truth.L = L;
  truth.n_cat = n_cat;
  truth.row_labels.resize(N);
  truth.col_labels.resize(M);
  for (int i = 0; i < N; ++i)
    truth.row_labels[i] = i < K ? i : static_cast<int>(rng.uniform_below(K));
  for (int j = 0; j < M; ++j)
    truth.col_labels[j] = j < L ? j : static_cast<int>(rng.uniform_below(L));

  truth.block_dist.assign(static_cast<std::size_t>(K) * L * n_cat, 0.0);
  const double off_mode = (1.0 - sharpness) / (n_cat - 1);
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < L; ++l) {
      const int mode = static_cast<int>(rng.uniform_below(n_cat));
      for (int c = 0; c < n_cat; ++c) truth.at(k, l, c) = c == mode ? sharpness : off_mode;
    }
  }

  CategoricalMatrix data;
  data.n_rows = N;
  data.n_cols = M;
  data.n_cat = n_cat;
  data.codes.resize(static_cast<std::size_t>(N) * M);
  data.mask.assign(static_cast<std::size_t>(N) * M, 1);
  data.row_ids.reserve(N);
  for (int i = 0; i < N; ++i) data.row_ids.push_back("cell_" + std::to_string(i));
  data.col_meta.reserve(M);
  for (int j = 0; j < M; ++j) {
    BinMeta meta;
    meta.chromosome = "chr1";
    meta.start = static_cast<long long>(j) * 500000;
    meta.end = meta.start + 500000;
    meta.bin_id = "chr1:" + std::to_string(meta.start) + "-" + std::to_string(meta.end);
    data.col_meta.push_back(meta);
  }

  for (int i = 0; i < N; ++i) {
    const int k = truth.row_labels[i];
    for (int j = 0; j < M; ++j) {
      const int l = truth.col_labels[j];
      const double u = rng.uniform();
      double acc = 0.0;
      int code = n_cat - 1;
      for (int c = 0; c < n_cat; ++c) {
        acc += truth.at(k, l, c);
        if (u < acc) {
          code = c;
          break;
        }
      }
      data.codes[static_cast<std::size_t>(i) * M + j] = code;
    }
  }
  return {std::move(data), std::move(truth)};
}

// Masks each cell independently with probability `rate`; hidden codes are
// retained for evaluation.
inline CategoricalMatrix apply_mcar_mask(const CategoricalMatrix& data, double rate,
                                         std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("apply_mcar_mask: rate must lie in [0, 1)");
  CategoricalMatrix out = data;
  Rng rng(seed);
  for (std::size_t idx = 0; idx < out.cells(); ++idx)
    if (rng.uniform() < rate) out.mask[idx] = 0;
  return out;
}

}  // namespace cnsbm
