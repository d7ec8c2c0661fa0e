#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#include "cnsbm/cavi.hpp"

namespace cnsbm {

struct SviConfig {
  int batch_rows = 64;
  int batch_cols = 64;
  double tau = 1.0;    // step-size delay, eta_t = (t + tau)^(-kappa)
  double kappa = 0.7;  // forgetting rate in (0.5, 1]
  int max_steps = 1000;
  int eval_every = 10;  // full-data ELBO evaluation interval
  double tol = 1e-4;
  int window = 5;
  int threads = 1;

  void validate(int N, int M) const {
    if (batch_rows < 1 || batch_rows > N || batch_cols < 1 || batch_cols > M)
      throw DomainError("SviConfig: batch sizes must lie in [1, N] x [1, M]");
    if (!(kappa > 0.5 && kappa <= 1.0)) throw DomainError("SviConfig: kappa must be in (0.5, 1]");
    if (tau < 0.0) throw DomainError("SviConfig: tau must be non-negative");
    if (max_steps < 1 || eval_every < 1) throw DomainError("SviConfig: counts must be >= 1");
    if (!(tol > 0.0)) throw DomainError("SviConfig: tol must be positive");
  }
};

inline double svi_step_size(int t, const SviConfig& config) {
  return std::pow(static_cast<double>(t) + config.tau, -config.kappa);
}

namespace detail {

// batch-restricted row mass: only columns in `cols` contribute
inline void row_mass_batch(const VariationalState& s, const CategoricalMatrix& data,
                           const WeightMatrix& w, int i, const std::vector<int>& cols,
                           double* W) {
  std::fill(W, W + static_cast<std::size_t>(s.L) * s.n_cat, 0.0);
  for (int j : cols) {
    const double wij = w.at(i, j);
    if (wij == 0.0) continue;
    const int c = data.code(i, j);
    for (int l = 0; l < s.L; ++l)
      W[static_cast<std::size_t>(l) * s.n_cat + c] += wij * s.phi_col(j, l);
  }
}

inline std::size_t svi_workspace_bytes(int batch_rows, int batch_cols, int K, int L, int n_cat) {
  const std::size_t locals =
      static_cast<std::size_t>(batch_rows) * K + static_cast<std::size_t>(batch_cols) * L;
  const std::size_t scratch = static_cast<std::size_t>(L) * n_cat +
                              static_cast<std::size_t>(K) * n_cat +
                              3 * static_cast<std::size_t>(K) * L * n_cat;
  return (locals + scratch) * sizeof(double);
}

}  // namespace detail

// One stochastic step: local updates on the sampled rows/columns (sums over
// the full complementary axis), then intermediate global estimates from the
// batch submatrix, scaled to full-data size and blended with eta_t.
inline void svi_step(VariationalState& state, const CategoricalMatrix& data,
                     const WeightMatrix& weights, const Priors& priors,
                     const std::vector<int>& batch_rows, const std::vector<int>& batch_cols,
                     int t, const SviConfig& config) {
  const int K = state.K, L = state.L, ncat = state.n_cat;
  {
    const auto elog_block = detail::block_elog(state);
    const auto elog_row = expected_log_dirichlet(detail::vec(state.gamma_row));
    std::vector<double> W(static_cast<std::size_t>(L) * ncat), scores(K), probs(K);
    const std::size_t stride = static_cast<std::size_t>(L) * ncat;
    for (int i : batch_rows) {
      detail::row_mass(state, data, weights, i, W.data());
      for (int k = 0; k < K; ++k) {
        double acc = elog_row[k];
        const double* Tk = elog_block.data() + k * stride;
        for (std::size_t idx = 0; idx < stride; ++idx) acc += Tk[idx] * W[idx];
        scores[k] = acc;
      }
      detail::softmax(scores.data(), K, probs.data());
      for (int k = 0; k < K; ++k) state.phi_row(i, k) = probs[k];
    }
    const auto elog_col = expected_log_dirichlet(detail::vec(state.gamma_col));
    std::vector<double> V(static_cast<std::size_t>(K) * ncat), cscores(L), cprobs(L);
    for (int j : batch_cols) {
      detail::col_mass(state, data, weights, j, V.data());
      for (int l = 0; l < L; ++l) {
        double acc = elog_col[l];
        for (int k = 0; k < K; ++k) {
          const double* Tkl = elog_block.data() + (static_cast<std::size_t>(k) * L + l) * ncat;
          const double* Vk = V.data() + static_cast<std::size_t>(k) * ncat;
          for (int c = 0; c < ncat; ++c) acc += Tkl[c] * Vk[c];
        }
        cscores[l] = acc;
      }
      detail::softmax(cscores.data(), L, cprobs.data());
      for (int l = 0; l < L; ++l) state.phi_col(j, l) = cprobs[l];
    }
  }

  // intermediate estimates, scaled to full-data totals
  const double row_scale = static_cast<double>(state.N) / batch_rows.size();
  const double col_scale = static_cast<double>(state.M) / batch_cols.size();
  Eigen::VectorXd gamma_row_hat = Eigen::VectorXd::Constant(K, priors.alpha_row);
  for (int i : batch_rows)
    for (int k = 0; k < K; ++k) gamma_row_hat[k] += row_scale * state.phi_row(i, k);
  Eigen::VectorXd gamma_col_hat = Eigen::VectorXd::Constant(L, priors.alpha_col);
  for (int j : batch_cols)
    for (int l = 0; l < L; ++l) gamma_col_hat[l] += col_scale * state.phi_col(j, l);

  const std::size_t stride = static_cast<std::size_t>(L) * ncat;
  std::vector<double> S(static_cast<std::size_t>(K) * stride, 0.0);
  std::vector<double> W(stride);
  for (int i : batch_rows) {
    detail::row_mass_batch(state, data, weights, i, batch_cols, W.data());
    for (int k = 0; k < K; ++k) {
      const double p = state.phi_row(i, k);
      if (p == 0.0) continue;
      double* Sk = S.data() + k * stride;
      for (std::size_t idx = 0; idx < stride; ++idx) Sk[idx] += p * W[idx];
    }
  }
  const double block_scale = row_scale * col_scale;

  // blend: gamma <- (1 - eta) gamma + eta gamma_hat
  const double eta = svi_step_size(t, config);
  for (int k = 0; k < K; ++k)
    state.gamma_row[k] = (1.0 - eta) * state.gamma_row[k] + eta * gamma_row_hat[k];
  for (int l = 0; l < L; ++l)
    state.gamma_col[l] = (1.0 - eta) * state.gamma_col[l] + eta * gamma_col_hat[l];
  for (std::size_t idx = 0; idx < state.gamma_block.size(); ++idx)
    state.gamma_block[idx] = (1.0 - eta) * state.gamma_block[idx] +
                             eta * (priors.alpha_block + block_scale * S[idx]);
}

inline std::pair<VariationalState, FitReport> fit_svi(const CategoricalMatrix& data,
                                                      const WeightMatrix& weights,
                                                      const Priors& priors,
                                                      VariationalState state,
                                                      const SviConfig& config,
                                                      std::uint64_t seed) {
  config.validate(state.N, state.M);
  priors.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(seed);
  FitReport report;
  report.workspace_bytes = detail::svi_workspace_bytes(config.batch_rows, config.batch_cols,
                                                       state.K, state.L, state.n_cat);

  std::vector<int> all_rows(state.N), all_cols(state.M);
  for (int i = 0; i < state.N; ++i) all_rows[i] = i;
  for (int j = 0; j < state.M; ++j) all_cols[j] = j;

  auto sample_batch = [&rng](std::vector<int>& pool, int size) {
    for (int t = 0; t < size; ++t) {
      const std::size_t pick = t + rng.uniform_below(pool.size() - t);
      std::swap(pool[t], pool[pick]);
    }
    std::vector<int> batch(pool.begin(), pool.begin() + size);
    std::sort(batch.begin(), batch.end());
    return batch;
  };

  std::vector<double> changes;
  for (int t = 1; t <= config.max_steps; ++t) {
    const auto batch_rows = sample_batch(all_rows, config.batch_rows);
    const auto batch_cols = sample_batch(all_cols, config.batch_cols);
    svi_step(state, data, weights, priors, batch_rows, batch_cols, t, config);
    if (t % config.eval_every != 0) continue;
    const double elbo = compute_elbo(state, data, weights, priors);
    if (!report.elbo_trace.empty())
      changes.push_back(std::abs(elbo - report.elbo_trace.back()));
    report.elbo_trace.push_back(elbo);
    report.iterations = t;
    if (static_cast<int>(changes.size()) >= config.window) {
      double avg = 0.0;
      for (int s = 0; s < config.window; ++s) avg += changes[changes.size() - 1 - s];
      if (avg / config.window < config.tol) {
        report.converged = true;
        break;
      }
    }
  }
  if (report.iterations == 0) report.iterations = config.max_steps;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(state), std::move(report)};
}

}  // namespace cnsbm
