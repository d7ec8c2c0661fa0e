#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cnsbm/common.hpp"
#include "cnsbm/special.hpp"

namespace cnsbm {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Priors {
  double alpha_block = 1.0;  // block emission Dirichlet
  double alpha_row = 1.0;    // row-cluster proportions
  double alpha_col = 1.0;    // column-cluster proportions

  void validate() const {
    if (!(alpha_block > 0.0 && alpha_row > 0.0 && alpha_col > 0.0))
      throw DomainError("Priors: concentrations must be strictly positive");
  }
};

// Mean-field posterior: soft assignments phi and Dirichlet parameters gamma.
struct VariationalState {
  int N = 0, M = 0, K = 0, L = 0, n_cat = 0;
  MatrixRM phi_row;                 // N x K, row-stochastic
  MatrixRM phi_col;                 // M x L, row-stochastic
  Eigen::VectorXd gamma_row;        // K
  Eigen::VectorXd gamma_col;        // L
  std::vector<double> gamma_block;  // K * L * n_cat

  double gblock(int k, int l, int c) const {
    return gamma_block[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }
  double& gblock(int k, int l, int c) {
    return gamma_block[(static_cast<std::size_t>(k) * L + l) * n_cat + c];
  }

  static VariationalState zeros(int N, int M, int K, int L, int n_cat) {
    VariationalState s;
    s.N = N;
    s.M = M;
    s.K = K;
    s.L = L;
    s.n_cat = n_cat;
    s.phi_row = MatrixRM::Zero(N, K);
    s.phi_col = MatrixRM::Zero(M, L);
    s.gamma_row = Eigen::VectorXd::Zero(K);
    s.gamma_col = Eigen::VectorXd::Zero(L);
    s.gamma_block.assign(static_cast<std::size_t>(K) * L * n_cat, 0.0);
    return s;
  }

  void validate(double tol = 1e-9) const {
    for (int i = 0; i < N; ++i)
      if (std::abs(phi_row.row(i).sum() - 1.0) > tol)
        throw NumericalError("VariationalState: phi_row row " + std::to_string(i) +
                             " not normalized");
    for (int j = 0; j < M; ++j)
      if (std::abs(phi_col.row(j).sum() - 1.0) > tol)
        throw NumericalError("VariationalState: phi_col row " + std::to_string(j) +
                             " not normalized");
    for (int k = 0; k < K; ++k)
      if (!(gamma_row[k] > 0.0)) throw NumericalError("VariationalState: non-positive gamma_row");
    for (int l = 0; l < L; ++l)
      if (!(gamma_col[l] > 0.0)) throw NumericalError("VariationalState: non-positive gamma_col");
    for (double g : gamma_block)
      if (!(g > 0.0)) throw NumericalError("VariationalState: non-positive gamma_block");
  }
};

struct HardAssignments {
  std::vector<int> g;  // N row-cluster labels
  std::vector<int> h;  // M column-cluster labels
};

namespace detail {

// argmax with lowest-index tie-break (strict > keeps the first maximum)
template <typename Accessor>
int argmax_lowest(int n, Accessor value) {
  int best = 0;
  double best_v = value(0);
  for (int c = 1; c < n; ++c) {
    const double v = value(c);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

}  // namespace detail

inline HardAssignments map_assignments(const VariationalState& state) {
  HardAssignments hard;
  hard.g.resize(state.N);
  hard.h.resize(state.M);
  for (int i = 0; i < state.N; ++i)
    hard.g[i] = detail::argmax_lowest(state.K, [&](int k) { return state.phi_row(i, k); });
  for (int j = 0; j < state.M; ++j)
    hard.h[j] = detail::argmax_lowest(state.L, [&](int l) { return state.phi_col(j, l); });
  return hard;
}

// Dirichlet-mean argmax of block (k, l); equals the parameter argmax.
inline int block_mode(const VariationalState& state, int k, int l) {
  return detail::argmax_lowest(state.n_cat, [&](int c) { return state.gblock(k, l, c); });
}

}  // namespace cnsbm
