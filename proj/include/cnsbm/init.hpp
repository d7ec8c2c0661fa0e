#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <iostream>
#include <limits>
#include <vector>

#include "cnsbm/cavi.hpp"

namespace cnsbm {

enum class InitKind { Random, Kmeans, Spectral };
enum class SpectralVariant { Log, Bistochastic };

namespace detail {

inline void soften_labels(MatrixRM& phi, const std::vector<int>& labels, double sharp = 0.9) {
  const int K = static_cast<int>(phi.cols());
  const double base = (1.0 - sharp) / K;
  for (int i = 0; i < phi.rows(); ++i) {
    for (int k = 0; k < K; ++k) phi(i, k) = base + (k == labels[i] ? sharp : 0.0);
  }
}

inline double standard_normal(Rng& rng) {
  double u1;
  do {
    u1 = rng.uniform();
  } while (u1 <= 0.0);
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Lloyd iterations with k-means++ seeding; empty clusters are reseeded to
// the point farthest from its center. Returns the best labeling over
// `restarts` runs by within-cluster sum of squares.
inline std::vector<int> kmeans(const Eigen::MatrixXd& X, int k, Rng& rng, int restarts = 10,
                               int max_iter = 100) {
  const int n = static_cast<int>(X.rows());
  if (k > n) throw DomainError("kmeans: more clusters than points");
  std::vector<int> best_labels(n, 0);
  double best_inertia = std::numeric_limits<double>::infinity();

  for (int run = 0; run < restarts; ++run) {
    Eigen::MatrixXd centers(k, X.cols());
    // k-means++ seeding
    centers.row(0) = X.row(static_cast<int>(rng.uniform_below(n)));
    Eigen::VectorXd dist2 = (X.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int c = 1; c < k; ++c) {
      std::vector<double> weights(dist2.data(), dist2.data() + n);
      double total = 0.0;
      for (double w : weights) total += w;
      const int pick = total > 0.0 ? static_cast<int>(rng.categorical(weights))
                                   : static_cast<int>(rng.uniform_below(n));
      centers.row(c) = X.row(pick);
      dist2 = dist2.cwiseMin((X.rowwise() - centers.row(c)).rowwise().squaredNorm());
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < max_iter; ++iter) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double best = (X.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
          const double d = (X.row(i) - centers.row(c)).squaredNorm();
          if (d < best) {
            best = d;
            arg = c;
          }
        }
        if (arg != labels[i]) {
          labels[i] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
      std::vector<int> counts(k, 0);
      for (int i = 0; i < n; ++i) {
        sums.row(labels[i]) += X.row(i);
        ++counts[labels[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) {
          centers.row(c) = sums.row(c) / counts[c];
        } else {
          // reseed empty cluster at the point farthest from its center
          int far = 0;
          double far_d = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d = (X.row(i) - centers.row(labels[i])).squaredNorm();
            if (d > far_d) {
              far_d = d;
              far = i;
            }
          }
          centers.row(c) = X.row(far);
        }
      }
    }
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) inertia += (X.row(i) - centers.row(labels[i])).squaredNorm();
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  return best_labels;
}

// Alternate row/column rescaling until row sums hit 1 and column sums hit
// N/M (the balanced rectangular target; both are 1 for square input).
inline Eigen::MatrixXd sinkhorn(Eigen::MatrixXd A, int max_iter = 50, double tol = 1e-8) {
  const double col_target = static_cast<double>(A.rows()) / A.cols();
  for (int iter = 0; iter < max_iter; ++iter) {
    for (int i = 0; i < A.rows(); ++i) {
      const double s = A.row(i).sum();
      if (s > 0.0) A.row(i) /= s;
    }
    for (int j = 0; j < A.cols(); ++j) {
      const double s = A.col(j).sum();
      if (s > 0.0) A.col(j) *= col_target / s;
    }
    double dev = 0.0;
    for (int i = 0; i < A.rows(); ++i) dev = std::max(dev, std::abs(A.row(i).sum() - 1.0));
    for (int j = 0; j < A.cols(); ++j)
      dev = std::max(dev, std::abs(A.col(j).sum() - col_target));
    if (dev < tol) break;
  }
  return A;
}

struct Svd {
  Eigen::MatrixXd U;  // N x r
  Eigen::MatrixXd V;  // M x r
  Eigen::VectorXd S;  // r
};

// Randomized range-finder SVD (Gaussian sketch, two power iterations).
inline Svd randomized_svd(const Eigen::MatrixXd& A, int rank, Rng& rng, int oversample = 8,
                          int power_iters = 2) {
  const int r = std::min<int>(rank + oversample, std::min(A.rows(), A.cols()));
  Eigen::MatrixXd G(A.cols(), r);
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < r; ++j) G(i, j) = standard_normal(rng);
  Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A * G).householderQ() *
                      Eigen::MatrixXd::Identity(A.rows(), r);
  for (int it = 0; it < power_iters; ++it) {
    Eigen::MatrixXd Z = Eigen::HouseholderQR<Eigen::MatrixXd>(A.transpose() * Q).householderQ() *
                        Eigen::MatrixXd::Identity(A.cols(), r);
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A * Z).householderQ() *
        Eigen::MatrixXd::Identity(A.rows(), r);
  }
  Eigen::MatrixXd B = Q.transpose() * A;  // r x M
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int keep = std::min(rank, static_cast<int>(svd.singularValues().size()));
  Svd out;
  out.U = (Q * svd.matrixU()).leftCols(keep);
  out.V = svd.matrixV().leftCols(keep);
  out.S = svd.singularValues().head(keep);
  return out;
}

inline VariationalState state_from_labels(const CategoricalMatrix& data,
                                          const std::vector<int>& row_labels,
                                          const std::vector<int>& col_labels, int K, int L,
                                          const Priors& priors) {
  VariationalState state = VariationalState::zeros(data.n_rows, data.n_cols, K, L, data.n_cat);
  soften_labels(state.phi_row, row_labels);
  soften_labels(state.phi_col, col_labels);
  const WeightMatrix w = WeightMatrix::observed(data);
  update_globals(state, data, w, priors);
  return state;
}

inline Eigen::MatrixXd codes_as_real(const CategoricalMatrix& data) {
  Eigen::MatrixXd X(data.n_rows, data.n_cols);
  for (int i = 0; i < data.n_rows; ++i)
    for (int j = 0; j < data.n_cols; ++j) X(i, j) = static_cast<double>(data.code(i, j));
  return X;
}

inline void require_fully_observed(const CategoricalMatrix& data, const char* who) {
  if (data.observed_count() != data.cells())
    throw DomainError(std::string(who) + ": requires a fully observed matrix (impute first)");
}

}  // namespace detail

// phi rows sampled from a symmetric Dirichlet(1), gamma from one global
// update on the sampled assignments.
inline VariationalState init_random(const CategoricalMatrix& data, const WeightMatrix& weights,
                                    int K, int L, const Priors& priors, std::uint64_t seed) {
  if (K < 1 || L < 1) throw DomainError("init_random: K and L must be >= 1");
  VariationalState state = VariationalState::zeros(data.n_rows, data.n_cols, K, L, data.n_cat);
  Rng rng(seed);
  auto fill_dirichlet = [&rng](MatrixRM& phi) {
    for (int i = 0; i < phi.rows(); ++i) {
      double total = 0.0;
      for (int k = 0; k < phi.cols(); ++k) {
        phi(i, k) = rng.exponential();
        total += phi(i, k);
      }
      for (int k = 0; k < phi.cols(); ++k) phi(i, k) /= total;
    }
  };
  fill_dirichlet(state.phi_row);
  fill_dirichlet(state.phi_col);
  update_globals(state, data, weights, priors);
  return state;
}

inline VariationalState init_kmeans(const CategoricalMatrix& data, int K, int L,
                                    const Priors& priors, std::uint64_t seed) {
  detail::require_fully_observed(data, "init_kmeans");
  if (K > data.n_rows || L > data.n_cols)
    throw DomainError("init_kmeans: more clusters than rows or columns");
  Rng rng(seed);
  const Eigen::MatrixXd X = detail::codes_as_real(data);
  const auto row_labels = detail::kmeans(X, K, rng);
  const auto col_labels = detail::kmeans(X.transpose(), L, rng);
  return detail::state_from_labels(data, row_labels, col_labels, K, L, priors);
}

// Spectral biclustering: log1p or Sinkhorn-bistochasticized input, truncated
// SVD, then k-means on the singular-value-scaled row/column embeddings.
inline VariationalState init_spectral(const CategoricalMatrix& data, int K, int L,
                                      SpectralVariant variant, int n_components,
                                      const Priors& priors, std::uint64_t seed) {
  detail::require_fully_observed(data, "init_spectral");
  if (n_components < 1) throw DomainError("init_spectral: n_components must be >= 1");
  if (K > data.n_rows || L > data.n_cols)
    throw DomainError("init_spectral: more clusters than rows or columns");

  Eigen::MatrixXd A = detail::codes_as_real(data);
  const double lo = A.minCoeff(), hi = A.maxCoeff();
  if (lo == hi) {
    std::cerr << "init_spectral: constant matrix, falling back to random initialization\n";
    return init_random(data, WeightMatrix::observed(data), K, L, priors, seed);
  }
  if (variant == SpectralVariant::Log) {
    A = (A.array() + 1.0).log();
  } else {
    A = detail::sinkhorn(A.array() + 1.0);
  }

  Rng rng(seed);
  const auto svd = detail::randomized_svd(A, n_components, rng);
  const Eigen::MatrixXd row_embed = svd.U * svd.S.asDiagonal();
  const Eigen::MatrixXd col_embed = svd.V * svd.S.asDiagonal();
  const auto row_labels = detail::kmeans(row_embed, K, rng);
  const auto col_labels = detail::kmeans(col_embed, L, rng);
  return detail::state_from_labels(data, row_labels, col_labels, K, L, priors);
}

}  // namespace cnsbm
