#pragma once

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "cnsbm/cavi.hpp"
#include "cnsbm/init.hpp"
#include "cnsbm/metrics.hpp"

namespace cnsbm {

// Everything needed to fit one model stage end to end.
struct StageConfig {
  int K = 4;
  int L = 6;
  Priors priors;
  InitKind init = InitKind::Random;
  SpectralVariant spectral_variant = SpectralVariant::Log;
  int spectral_components = 0;  // 0 -> min(K, L)
  std::uint64_t seed = 0;
  FitConfig fit;
};

inline std::pair<VariationalState, FitReport> fit_stage(const CategoricalMatrix& data,
                                                        const WeightMatrix& weights,
                                                        const StageConfig& cfg) {
  VariationalState init_state;
  switch (cfg.init) {
    case InitKind::Random:
      init_state = init_random(data, weights, cfg.K, cfg.L, cfg.priors, cfg.seed);
      break;
    case InitKind::Kmeans:
      init_state = init_kmeans(data, cfg.K, cfg.L, cfg.priors, cfg.seed);
      break;
    case InitKind::Spectral: {
      const int r = cfg.spectral_components > 0 ? cfg.spectral_components
                                                : std::min(cfg.K, cfg.L);
      init_state = init_spectral(data, cfg.K, cfg.L, cfg.spectral_variant, r, cfg.priors,
                                 cfg.seed);
      break;
    }
  }
  return fit(data, weights, cfg.priors, std::move(init_state), cfg.fit);
}

struct Decomposition {
  std::vector<int> main_codes;       // N * M block-mode codes
  std::vector<int> residual_signed;  // N * M, defined on observed cells
  int residual_offset = 0;
  CategoricalMatrix residual_cat;    // shifted residual alphabet, full width
  VariationalState stage1;
  VariationalState stage2;
  FitReport report1;
  FitReport report2;
  HardAssignments stage1_hard;
  HardAssignments stage2_hard;       // indices into kept_rows / stage2_cols
  std::vector<int> excluded_cols;    // dropped before stage 2
  std::vector<int> stage2_cols;      // kept column indices
  std::vector<int> kept_rows;        // rows surviving the outlier filter
};

// Per-cell representative code from the MAP cluster pair's block mode.
inline std::vector<int> main_matrix(const CategoricalMatrix& data,
                                    const VariationalState& state) {
  const auto hard = map_assignments(state);
  std::vector<int> out(data.cells());
  for (int i = 0; i < data.n_rows; ++i)
    for (int j = 0; j < data.n_cols; ++j)
      out[static_cast<std::size_t>(i) * data.n_cols + j] = block_mode(state, hard.g[i], hard.h[j]);
  return out;
}

struct ResidualResult {
  std::vector<int> signed_values;  // N * M, zero where unobserved
  int offset = 0;                  // -min observed residual
  CategoricalMatrix cat;           // codes = signed + offset
};

// r_ij = c_ij - main_ij on observed cells, shifted to a non-negative
// categorical alphabet of size max - min + 1 (at least 2).
inline ResidualResult residual(const CategoricalMatrix& data, const std::vector<int>& main) {
  if (main.size() != data.cells()) throw ShapeError("residual: main matrix shape mismatch");
  ResidualResult res;
  res.signed_values.assign(data.cells(), 0);
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (std::size_t idx = 0; idx < data.cells(); ++idx) {
    if (!data.mask[idx]) continue;
    const int r = data.codes[idx] - main[idx];
    res.signed_values[idx] = r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  if (lo > hi) throw DomainError("residual: no observed cells");
  res.offset = -lo;
  res.cat = data;
  res.cat.n_cat = std::max(hi - lo + 1, 2);
  for (std::size_t idx = 0; idx < data.cells(); ++idx)
    res.cat.codes[idx] = data.mask[idx] ? res.signed_values[idx] + res.offset : 0;
  return res;
}

namespace detail {

inline CategoricalMatrix select_submatrix(const CategoricalMatrix& m,
                                          const std::vector<int>& rows,
                                          const std::vector<int>& cols) {
  CategoricalMatrix out;
  out.n_rows = static_cast<int>(rows.size());
  out.n_cols = static_cast<int>(cols.size());
  out.n_cat = m.n_cat;
  out.codes.resize(out.cells());
  out.mask.resize(out.cells());
  for (int r : rows) out.row_ids.push_back(r < static_cast<int>(m.row_ids.size())
                                               ? m.row_ids[r]
                                               : "row_" + std::to_string(r));
  if (!m.col_meta.empty())
    for (int c : cols) out.col_meta.push_back(m.col_meta[c]);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < cols.size(); ++b) {
      const std::size_t src = static_cast<std::size_t>(rows[a]) * m.n_cols + cols[b];
      out.codes[a * cols.size() + b] = m.codes[src];
      out.mask[a * cols.size() + b] = m.mask[src];
    }
  }
  return out;
}

}  // namespace detail

// Stage 1 fits the full matrix; the block-mode main matrix is subtracted,
// the residual is re-encoded categorically (excluded columns and optionally
// small-cluster outlier rows dropped), and stage 2 fits the remainder.
inline Decomposition two_stage(const CategoricalMatrix& data, const StageConfig& stage1_cfg,
                               const StageConfig& stage2_cfg,
                               const std::function<bool(const BinMeta&)>& exclude = nullptr,
                               int min_cluster_rows = 0) {
  Decomposition dec;
  const WeightMatrix w1 = WeightMatrix::observed(data);
  std::tie(dec.stage1, dec.report1) = fit_stage(data, w1, stage1_cfg);
  dec.stage1_hard = map_assignments(dec.stage1);

  dec.main_codes = main_matrix(data, dec.stage1);
  auto res = residual(data, dec.main_codes);
  dec.residual_signed = std::move(res.signed_values);
  dec.residual_offset = res.offset;
  dec.residual_cat = std::move(res.cat);

  for (int j = 0; j < data.n_cols; ++j) {
    const bool drop = exclude && j < static_cast<int>(data.col_meta.size()) &&
                      exclude(data.col_meta[j]);
    (drop ? dec.excluded_cols : dec.stage2_cols).push_back(j);
  }
  if (dec.stage2_cols.empty()) throw DomainError("two_stage: every column was excluded");

  if (min_cluster_rows > 0) {
    std::vector<int> cluster_sizes(dec.stage1.K, 0);
    for (int g : dec.stage1_hard.g) ++cluster_sizes[g];
    for (int i = 0; i < data.n_rows; ++i)
      if (cluster_sizes[dec.stage1_hard.g[i]] >= min_cluster_rows) dec.kept_rows.push_back(i);
  } else {
    for (int i = 0; i < data.n_rows; ++i) dec.kept_rows.push_back(i);
  }
  if (dec.kept_rows.empty()) throw DomainError("two_stage: outlier filter removed every row");

  const CategoricalMatrix stage2_input =
      detail::select_submatrix(dec.residual_cat, dec.kept_rows, dec.stage2_cols);
  const WeightMatrix w2 = WeightMatrix::observed(stage2_input);
  std::tie(dec.stage2, dec.report2) = fit_stage(stage2_input, w2, stage2_cfg);
  dec.stage2_hard = map_assignments(dec.stage2);
  return dec;
}

}  // namespace cnsbm
