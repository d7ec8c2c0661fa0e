#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cnsbm/cavi.hpp"
#include "cnsbm/init.hpp"
#include "cnsbm/metrics.hpp"

namespace cnsbm {

enum class Axis { Row, Col };
enum class SplitMethod { Kmeans, Mode };
enum class RefineCriterion { Elbo, Icl };

struct IclScore {
  double loglik_complete = 0.0;
  double penalty = 0.0;
  double icl = 0.0;  // loglik_complete - penalty
  int K_eff = 0;
  int L_eff = 0;
};

inline double icl_penalty(int K_eff, int L_eff, int N, int M, int n_cat,
                          std::size_t observed_count) {
  const double log_obs = std::log(static_cast<double>(observed_count));
  return 0.5 * ((K_eff - 1) * std::log(static_cast<double>(N)) +
                (L_eff - 1) * std::log(static_cast<double>(M)) +
                static_cast<double>(n_cat - 1) * K_eff * L_eff * log_obs);
}

// Complete-data log-likelihood at the MAP assignments with empirical block
// and proportion estimates, minus the complexity penalty over effective
// (non-empty) clusters.
inline IclScore icl(const CategoricalMatrix& data, const VariationalState& state,
                    const Priors& priors) {
  (void)priors;  // ML plug-in estimates, prior mass removed
  const auto hard = map_assignments(state);
  std::vector<int> row_counts(state.K, 0), col_counts(state.L, 0);
  for (int g : hard.g) ++row_counts[g];
  for (int h : hard.h) ++col_counts[h];

  IclScore score;
  for (int c : row_counts)
    if (c > 0) ++score.K_eff;
  for (int c : col_counts)
    if (c > 0) ++score.L_eff;

  const auto blocks = empirical_blocks(data, hard, state.K, state.L);
  double loglik = 0.0;
  for (int i = 0; i < data.n_rows; ++i)
    for (int j = 0; j < data.n_cols; ++j)
      if (data.observed(i, j))
        loglik += std::log(std::max(blocks.at(hard.g[i], hard.h[j], data.code(i, j)), 1e-10));
  for (int i = 0; i < data.n_rows; ++i)
    loglik += std::log(std::max(static_cast<double>(row_counts[hard.g[i]]) / data.n_rows, 1e-10));
  for (int j = 0; j < data.n_cols; ++j)
    loglik += std::log(std::max(static_cast<double>(col_counts[hard.h[j]]) / data.n_cols, 1e-10));

  score.loglik_complete = loglik;
  score.penalty =
      icl_penalty(score.K_eff, score.L_eff, data.n_rows, data.n_cols, data.n_cat,
                  data.observed_count());
  score.icl = score.loglik_complete - score.penalty;
  return score;
}

namespace detail {

inline std::vector<int> axis_counts(const HardAssignments& hard, const VariationalState& s,
                                    Axis axis) {
  std::vector<int> counts(axis == Axis::Row ? s.K : s.L, 0);
  for (int v : axis == Axis::Row ? hard.g : hard.h) ++counts[v];
  return counts;
}

inline VariationalState short_refit(VariationalState state, const CategoricalMatrix& data,
                                    const Priors& priors, int sweeps) {
  if (sweeps <= 0) return state;
  const WeightMatrix w = WeightMatrix::observed(data);
  FitConfig cfg;
  cfg.max_iters = sweeps;
  cfg.tol = 1e-6;
  return fit(data, w, priors, std::move(state), cfg).first;
}

// rewrite the phi rows of `members` to softened one-hot labels, refresh
// globals, and run a short refit
inline VariationalState rebuild_candidate(VariationalState state, const CategoricalMatrix& data,
                                          const Priors& priors, Axis axis,
                                          const std::vector<int>& members,
                                          const std::vector<int>& labels, int refit_sweeps) {
  MatrixRM& phi = axis == Axis::Row ? state.phi_row : state.phi_col;
  const int n_clusters = static_cast<int>(phi.cols());
  for (std::size_t t = 0; t < members.size(); ++t) {
    const int idx = members[t];
    for (int c = 0; c < n_clusters; ++c)
      phi(idx, c) = 0.1 / n_clusters + (c == labels[t] ? 0.9 : 0.0);
  }
  const WeightMatrix w = WeightMatrix::observed(data);
  update_globals(state, data, w, priors);
  return short_refit(std::move(state), data, priors, refit_sweeps);
}

}  // namespace detail

// Re-labels the members of one cluster into two groups (2-means on their
// code vectors, or by per-member modal category) and refits briefly.
inline VariationalState split_cluster(const VariationalState& state,
                                      const CategoricalMatrix& data, const Priors& priors,
                                      Axis axis, int cluster,
                                      SplitMethod method = SplitMethod::Kmeans,
                                      std::uint64_t seed = 0, int refit_sweeps = 20) {
  const auto hard = map_assignments(state);
  const auto& labels_in = axis == Axis::Row ? hard.g : hard.h;
  const int n_clusters = axis == Axis::Row ? state.K : state.L;

  std::vector<int> members;
  for (int idx = 0; idx < static_cast<int>(labels_in.size()); ++idx)
    if (labels_in[idx] == cluster) members.push_back(idx);
  if (members.size() < 2) throw DomainError("split_cluster: cluster too small to split");

  int free_slot = -1;
  {
    const auto counts = detail::axis_counts(hard, state, axis);
    for (int c = 0; c < n_clusters; ++c)
      if (counts[c] == 0) {
        free_slot = c;
        break;
      }
  }
  if (free_slot < 0) throw CapacityError("split_cluster: no empty cluster slot available");

  std::vector<int> group(members.size(), 0);  // 0 = keep label, 1 = free slot
  if (method == SplitMethod::Kmeans) {
    const int dim = axis == Axis::Row ? data.n_cols : data.n_rows;
    Eigen::MatrixXd X(members.size(), dim);
    for (std::size_t t = 0; t < members.size(); ++t)
      for (int d = 0; d < dim; ++d)
        X(static_cast<int>(t), d) = axis == Axis::Row ? data.code(members[t], d)
                                                      : data.code(d, members[t]);
    Rng rng(seed);
    group = detail::kmeans(X, 2, rng);
  } else {
    // group by each member's modal category, majority mode keeps the label
    std::vector<int> modes(members.size());
    std::vector<int> mode_counts(data.n_cat, 0);
    for (std::size_t t = 0; t < members.size(); ++t) {
      std::vector<int> counts(data.n_cat, 0);
      const int dim = axis == Axis::Row ? data.n_cols : data.n_rows;
      for (int d = 0; d < dim; ++d) {
        const int i = axis == Axis::Row ? members[t] : d;
        const int j = axis == Axis::Row ? d : members[t];
        if (data.observed(i, j)) ++counts[data.code(i, j)];
      }
      modes[t] = detail::argmax_lowest(data.n_cat, [&](int c) { return counts[c]; });
      ++mode_counts[modes[t]];
    }
    const int majority =
        detail::argmax_lowest(data.n_cat, [&](int c) { return mode_counts[c]; });
    for (std::size_t t = 0; t < members.size(); ++t) group[t] = modes[t] == majority ? 0 : 1;
  }

  std::size_t side_a = 0;
  for (int g : group) side_a += g == 0 ? 1 : 0;
  if (side_a == 0 || side_a == members.size())
    throw DomainError("split_cluster: degenerate split leaves one side empty");

  std::vector<int> new_labels(members.size());
  for (std::size_t t = 0; t < members.size(); ++t)
    new_labels[t] = group[t] == 0 ? cluster : free_slot;
  return detail::rebuild_candidate(state, data, priors, axis, members, new_labels, refit_sweeps);
}

// Relabels the members of cluster b into a and refits briefly.
inline VariationalState merge_clusters(const VariationalState& state,
                                       const CategoricalMatrix& data, const Priors& priors,
                                       Axis axis, int a, int b, int refit_sweeps = 20) {
  if (a == b) throw DomainError("merge_clusters: clusters must differ");
  VariationalState out = state;
  MatrixRM& phi = axis == Axis::Row ? out.phi_row : out.phi_col;
  for (int idx = 0; idx < phi.rows(); ++idx) {
    phi(idx, a) += phi(idx, b);
    phi(idx, b) = 0.0;
  }
  const WeightMatrix w = WeightMatrix::observed(data);
  update_globals(out, data, w, priors);
  return detail::short_refit(std::move(out), data, priors, refit_sweeps);
}

struct RefineResult {
  VariationalState state;
  IclScore score;
  std::vector<double> criterion_trace;  // accepted moves only, non-decreasing
  int accepted_moves = 0;
};

namespace detail {

inline double criterion_value(const CategoricalMatrix& data, const VariationalState& state,
                              const WeightMatrix& w, const Priors& priors,
                              RefineCriterion criterion) {
  return criterion == RefineCriterion::Icl ? icl(data, state, priors).icl
                                           : compute_elbo(state, data, w, priors);
}

// modal category vector of one row (column) cluster across the other axis
inline std::vector<int> modal_vector(const VariationalState& s, Axis axis, int cluster) {
  std::vector<int> out;
  if (axis == Axis::Row) {
    for (int l = 0; l < s.L; ++l) out.push_back(block_mode(s, cluster, l));
  } else {
    for (int k = 0; k < s.K; ++k) out.push_back(block_mode(s, k, cluster));
  }
  return out;
}

// weighted entropy of the blocks belonging to one cluster, used to rank
// split proposals
inline double cluster_entropy(const VariationalState& s, Axis axis, int cluster) {
  double acc = 0.0;
  const int other = axis == Axis::Row ? s.L : s.K;
  for (int o = 0; o < other; ++o) {
    const int k = axis == Axis::Row ? cluster : o;
    const int l = axis == Axis::Row ? o : cluster;
    double total = 0.0;
    for (int c = 0; c < s.n_cat; ++c) total += s.gblock(k, l, c);
    for (int c = 0; c < s.n_cat; ++c) {
      const double p = s.gblock(k, l, c) / total;
      if (p > 0.0) acc -= p * std::log(p);
    }
  }
  return acc;
}

}  // namespace detail

// Greedy local search over split/merge moves, accepting a move only when the
// chosen criterion improves.
inline RefineResult refine_search(const CategoricalMatrix& data, VariationalState state,
                                  const Priors& priors, int budget,
                                  RefineCriterion criterion = RefineCriterion::Icl,
                                  int min_rows = 5, int min_cols = 10,
                                  std::uint64_t seed = 0) {
  const WeightMatrix w = WeightMatrix::observed(data);
  RefineResult result;
  double current = detail::criterion_value(data, state, w, priors, criterion);
  result.criterion_trace.push_back(current);

  for (int move = 0; move < budget; ++move) {
    std::optional<VariationalState> best_state;
    double best_value = current;

    auto consider = [&](VariationalState candidate) {
      const double value = detail::criterion_value(data, candidate, w, priors, criterion);
      if (value > best_value) {
        best_value = value;
        best_state = std::move(candidate);
      }
    };

    for (Axis axis : {Axis::Row, Axis::Col}) {
      const auto hard = map_assignments(state);
      const auto counts = detail::axis_counts(hard, state, axis);
      const int n_clusters = axis == Axis::Row ? state.K : state.L;
      const int min_size = axis == Axis::Row ? min_rows : min_cols;

      // merges: identical modal block vectors, or undersized clusters
      for (int a = 0; a < n_clusters; ++a) {
        if (counts[a] == 0) continue;
        for (int b = a + 1; b < n_clusters; ++b) {
          if (counts[b] == 0) continue;
          const bool same_mode =
              detail::modal_vector(state, axis, a) == detail::modal_vector(state, axis, b);
          const bool small = counts[a] < min_size || counts[b] < min_size;
          if (!same_mode && !small) continue;
          try {
            consider(merge_clusters(state, data, priors, axis, a, b));
          } catch (const DomainError&) {
          }
        }
      }

      // splits: the highest-entropy non-trivial cluster on each axis
      int split_target = -1;
      double best_entropy = -1.0;
      for (int c = 0; c < n_clusters; ++c) {
        if (counts[c] < 2) continue;
        const double e = detail::cluster_entropy(state, axis, c);
        if (e > best_entropy) {
          best_entropy = e;
          split_target = c;
        }
      }
      if (split_target >= 0) {
        try {
          consider(split_cluster(state, data, priors, axis, split_target, SplitMethod::Kmeans,
                                 seed + move));
        } catch (const std::runtime_error&) {
        }
      }
    }

    if (!best_state) break;
    state = std::move(*best_state);
    current = best_value;
    result.criterion_trace.push_back(current);
    ++result.accepted_moves;
  }

  result.score = icl(data, state, priors);
  result.state = std::move(state);
  return result;
}

}  // namespace cnsbm
