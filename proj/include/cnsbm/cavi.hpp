#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <utility>
#include <vector>

#include "cnsbm/matrix.hpp"
#include "cnsbm/state.hpp"

namespace cnsbm {

struct FitConfig {
  int max_iters = 500;
  double tol = 1e-4;
  enum class TolMode { Absolute, Relative };
  TolMode tol_mode = TolMode::Absolute;
  bool weighted = false;        // importance-weighted fit, moving-average stop
  int moving_avg_window = 5;
  bool deterministic_reduction = true;  // all reductions run in fixed order
  int threads = 1;

  void validate() const {
    if (max_iters < 1) throw DomainError("FitConfig: max_iters must be >= 1");
    if (!(tol > 0.0)) throw DomainError("FitConfig: tol must be positive");
    if (moving_avg_window < 1) throw DomainError("FitConfig: window must be >= 1");
  }
};

struct FitReport {
  std::vector<double> elbo_trace;
  int iterations = 0;
  bool converged = false;
  double wall_time = 0.0;           // seconds
  std::size_t workspace_bytes = 0;  // per-sweep update working set
};

namespace detail {

// E[log pi^{(k,l)}_c] for every block, laid out like gamma_block
inline std::vector<double> block_elog(const VariationalState& s) {
  std::vector<double> out(s.gamma_block.size());
  const int ncat = s.n_cat;
  for (int k = 0; k < s.K; ++k) {
    for (int l = 0; l < s.L; ++l) {
      double total = 0.0;
      for (int c = 0; c < ncat; ++c) total += s.gblock(k, l, c);
      const double psi_total = digamma(total);
      for (int c = 0; c < ncat; ++c)
        out[(static_cast<std::size_t>(k) * s.L + l) * ncat + c] =
            digamma(s.gblock(k, l, c)) - psi_total;
    }
  }
  return out;
}

inline std::vector<double> vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Weighted category mass seen by row i: W[l * ncat + c] = sum_j w_ij phi^h_jl 1(c_ij = c)
inline void row_mass(const VariationalState& s, const CategoricalMatrix& data,
                     const WeightMatrix& w, int i, double* W) {
  std::fill(W, W + static_cast<std::size_t>(s.L) * s.n_cat, 0.0);
  for (int j = 0; j < s.M; ++j) {
    const double wij = w.at(i, j);
    if (wij == 0.0) continue;
    const int c = data.code(i, j);
    for (int l = 0; l < s.L; ++l) W[static_cast<std::size_t>(l) * s.n_cat + c] += wij * s.phi_col(j, l);
  }
}

// Column counterpart: V[k * ncat + c] = sum_i w_ij phi^g_ik 1(c_ij = c)
inline void col_mass(const VariationalState& s, const CategoricalMatrix& data,
                     const WeightMatrix& w, int j, double* V) {
  std::fill(V, V + static_cast<std::size_t>(s.K) * s.n_cat, 0.0);
  for (int i = 0; i < s.N; ++i) {
    const double wij = w.at(i, j);
    if (wij == 0.0) continue;
    const int c = data.code(i, j);
    for (int k = 0; k < s.K; ++k) V[static_cast<std::size_t>(k) * s.n_cat + c] += wij * s.phi_row(i, k);
  }
}

// max-shifted softmax into out[0..n)
inline void softmax(const double* scores, int n, double* out) {
  double m = scores[0];
  for (int k = 1; k < n; ++k) m = std::max(m, scores[k]);
  double norm = 0.0;
  for (int k = 0; k < n; ++k) {
    out[k] = std::exp(scores[k] - m);
    norm += out[k];
  }
  for (int k = 0; k < n; ++k) out[k] /= norm;
}

template <typename Fn>
inline void parallel_for(int n, int threads, Fn&& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

// updates local soft assignments for the row indices in [begin, end)
inline void update_row_range(VariationalState& s, const CategoricalMatrix& data,
                             const WeightMatrix& w, const std::vector<double>& elog_block,
                             const std::vector<double>& elog_prior, int begin, int end) {
  const int K = s.K, L = s.L, ncat = s.n_cat;
  std::vector<double> W(static_cast<std::size_t>(L) * ncat);
  std::vector<double> scores(K), probs(K);
  const std::size_t block_stride = static_cast<std::size_t>(L) * ncat;
  for (int i = begin; i < end; ++i) {
    row_mass(s, data, w, i, W.data());
    for (int k = 0; k < K; ++k) {
      const double* Tk = elog_block.data() + k * block_stride;
      double acc = elog_prior[k];
      for (std::size_t idx = 0; idx < block_stride; ++idx) acc += Tk[idx] * W[idx];
      if (!std::isfinite(acc))
        throw NumericalError("update_rows: non-finite log-weight at row " + std::to_string(i) +
                             ", cluster " + std::to_string(k));
      scores[k] = acc;
    }
    softmax(scores.data(), K, probs.data());
    for (int k = 0; k < K; ++k) s.phi_row(i, k) = probs[k];
  }
}

inline void update_col_range(VariationalState& s, const CategoricalMatrix& data,
                             const WeightMatrix& w, const std::vector<double>& elog_block,
                             const std::vector<double>& elog_prior, int begin, int end) {
  const int K = s.K, L = s.L, ncat = s.n_cat;
  std::vector<double> V(static_cast<std::size_t>(K) * ncat);
  std::vector<double> scores(L), probs(L);
  for (int j = begin; j < end; ++j) {
    col_mass(s, data, w, j, V.data());
    for (int l = 0; l < L; ++l) {
      double acc = elog_prior[l];
      for (int k = 0; k < K; ++k) {
        const double* Tkl = elog_block.data() + (static_cast<std::size_t>(k) * L + l) * ncat;
        const double* Vk = V.data() + static_cast<std::size_t>(k) * ncat;
        for (int c = 0; c < ncat; ++c) acc += Tkl[c] * Vk[c];
      }
      if (!std::isfinite(acc))
        throw NumericalError("update_cols: non-finite log-weight at column " + std::to_string(j) +
                             ", cluster " + std::to_string(l));
      scores[l] = acc;
    }
    softmax(scores.data(), L, probs.data());
    for (int l = 0; l < L; ++l) s.phi_col(j, l) = probs[l];
  }
}

// Block soft counts S_{klc} = sum_{(i,j) observed} w_ij phi^g_ik phi^h_jl 1(c_ij = c),
// streamed row by row so memory stays O(L * n_cat + K * L * n_cat).
inline std::vector<double> block_soft_counts(const VariationalState& s,
                                             const CategoricalMatrix& data,
                                             const WeightMatrix& w) {
  const int K = s.K, L = s.L, ncat = s.n_cat;
  const std::size_t block_stride = static_cast<std::size_t>(L) * ncat;
  std::vector<double> S(static_cast<std::size_t>(K) * block_stride, 0.0);
  std::vector<double> W(block_stride);
  for (int i = 0; i < s.N; ++i) {
    row_mass(s, data, w, i, W.data());
    for (int k = 0; k < K; ++k) {
      const double p = s.phi_row(i, k);
      if (p == 0.0) continue;
      double* Sk = S.data() + k * block_stride;
      for (std::size_t idx = 0; idx < block_stride; ++idx) Sk[idx] += p * W[idx];
    }
  }
  return S;
}

// sum_i sum_k phi_ik (log phi_ik - elog[k]); the assignment part of the KL
inline double assignment_kl(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>& phi,
                            const std::vector<double>& elog) {
  double acc = 0.0;
  for (int i = 0; i < phi.rows(); ++i) {
    for (int k = 0; k < phi.cols(); ++k) {
      const double p = phi(i, k);
      if (p <= 0.0) continue;  // 0 log 0 := 0
      acc += p * (std::log(std::max(p, 1e-300)) - elog[k]);
    }
  }
  return acc;
}

inline std::size_t cavi_workspace_bytes(int N, int M, int K, int L, int n_cat, int threads) {
  // locals recomputed every sweep plus scratch buffers
  const std::size_t locals = static_cast<std::size_t>(N) * K + static_cast<std::size_t>(M) * L;
  const std::size_t scratch = static_cast<std::size_t>(threads) *
                                  (static_cast<std::size_t>(L) * n_cat +
                                   static_cast<std::size_t>(K) * n_cat) +
                              2 * static_cast<std::size_t>(K) * L * n_cat;
  return (locals + scratch) * sizeof(double);
}

}  // namespace detail

inline void update_rows(VariationalState& state, const CategoricalMatrix& data,
                        const WeightMatrix& weights, const Priors& priors, int threads = 1) {
  (void)priors;  // the prior enters through gamma_row
  const auto elog_block = detail::block_elog(state);
  const auto elog_prior = expected_log_dirichlet(detail::vec(state.gamma_row));
  detail::parallel_for(state.N, threads, [&](int begin, int end) {
    detail::update_row_range(state, data, weights, elog_block, elog_prior, begin, end);
  });
}

inline void update_cols(VariationalState& state, const CategoricalMatrix& data,
                        const WeightMatrix& weights, const Priors& priors, int threads = 1) {
  (void)priors;
  const auto elog_block = detail::block_elog(state);
  const auto elog_prior = expected_log_dirichlet(detail::vec(state.gamma_col));
  detail::parallel_for(state.M, threads, [&](int begin, int end) {
    detail::update_col_range(state, data, weights, elog_block, elog_prior, begin, end);
  });
}

inline void update_globals(VariationalState& state, const CategoricalMatrix& data,
                           const WeightMatrix& weights, const Priors& priors) {
  for (int k = 0; k < state.K; ++k) {
    double acc = priors.alpha_row;
    for (int i = 0; i < state.N; ++i) acc += state.phi_row(i, k);
    state.gamma_row[k] = acc;
  }
  for (int l = 0; l < state.L; ++l) {
    double acc = priors.alpha_col;
    for (int j = 0; j < state.M; ++j) acc += state.phi_col(j, l);
    state.gamma_col[l] = acc;
  }
  const auto S = detail::block_soft_counts(state, data, weights);
  for (std::size_t idx = 0; idx < state.gamma_block.size(); ++idx)
    state.gamma_block[idx] = priors.alpha_block + S[idx];
}

inline double compute_elbo(const VariationalState& state, const CategoricalMatrix& data,
                           const WeightMatrix& weights, const Priors& priors) {
  const auto elog_block = detail::block_elog(state);
  const auto S = detail::block_soft_counts(state, data, weights);
  double lik = 0.0;
  for (std::size_t idx = 0; idx < S.size(); ++idx) lik += S[idx] * elog_block[idx];

  const auto gr = detail::vec(state.gamma_row);
  const auto gc = detail::vec(state.gamma_col);
  const auto elog_row = expected_log_dirichlet(gr);
  const auto elog_col = expected_log_dirichlet(gc);

  double kl = dirichlet_kl(gr, std::vector<double>(state.K, priors.alpha_row));
  kl += dirichlet_kl(gc, std::vector<double>(state.L, priors.alpha_col));
  kl += detail::assignment_kl(state.phi_row, elog_row);
  kl += detail::assignment_kl(state.phi_col, elog_col);

  const std::vector<double> block_prior(state.n_cat, priors.alpha_block);
  std::vector<double> gb(state.n_cat);
  for (int k = 0; k < state.K; ++k) {
    for (int l = 0; l < state.L; ++l) {
      for (int c = 0; c < state.n_cat; ++c) gb[c] = state.gblock(k, l, c);
      kl += dirichlet_kl(gb, block_prior);
    }
  }

  const double elbo = lik - kl;
  if (!std::isfinite(elbo)) throw NumericalError("compute_elbo: non-finite result");
  return elbo;
}

// Full coordinate-ascent loop: rows, columns, globals, ELBO, until the ELBO
// change (unweighted) or its moving average (weighted) drops below tol.
inline std::pair<VariationalState, FitReport> fit(const CategoricalMatrix& data,
                                                  const WeightMatrix& weights,
                                                  const Priors& priors, VariationalState state,
                                                  const FitConfig& config) {
  config.validate();
  priors.validate();
  const auto t0 = std::chrono::steady_clock::now();
  FitReport report;
  report.workspace_bytes = detail::cavi_workspace_bytes(state.N, state.M, state.K, state.L,
                                                        state.n_cat, config.threads);
  std::vector<double> changes;
  for (int iter = 0; iter < config.max_iters; ++iter) {
    update_rows(state, data, weights, priors, config.threads);
    update_cols(state, data, weights, priors, config.threads);
    update_globals(state, data, weights, priors);
    const double elbo = compute_elbo(state, data, weights, priors);
    if (!report.elbo_trace.empty()) {
      const double prev = report.elbo_trace.back();
      const double scale =
          config.tol_mode == FitConfig::TolMode::Relative ? std::max(std::abs(elbo), 1.0) : 1.0;
      changes.push_back(std::abs(elbo - prev) / scale);
    }
    report.elbo_trace.push_back(elbo);
    if (!config.weighted) {
      if (!changes.empty() && changes.back() < config.tol) {
        report.converged = true;
      }
    } else if (static_cast<int>(changes.size()) >= config.moving_avg_window) {
      double avg = 0.0;
      for (int t = 0; t < config.moving_avg_window; ++t)
        avg += changes[changes.size() - 1 - t];
      avg /= config.moving_avg_window;
      if (avg < config.tol) report.converged = true;
    }
    if (report.converged) break;
  }
  report.iterations = static_cast<int>(report.elbo_trace.size());
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(state), std::move(report)};
}

}  // namespace cnsbm
