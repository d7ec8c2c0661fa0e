#pragma once

#include <cmath>
#include <vector>

#include "cnsbm/common.hpp"

namespace cnsbm {

// Digamma via upward recurrence into the asymptotic regime, then the
// Bernoulli-number series. Accurate to ~1e-13 for x > 0.
inline double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x - 1/(2x) - sum B_{2n} / (2n x^{2n})
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

// E[log pi_k] under Dirichlet(gamma): psi(gamma_k) - psi(sum gamma)
inline std::vector<double> expected_log_dirichlet(const std::vector<double>& gamma) {
  double total = 0.0;
  for (double g : gamma) {
    if (!(g > 0.0)) throw DomainError("expected_log_dirichlet: non-positive parameter");
    total += g;
  }
  const double psi_total = digamma(total);
  std::vector<double> out(gamma.size());
  for (std::size_t k = 0; k < gamma.size(); ++k) out[k] = digamma(gamma[k]) - psi_total;
  return out;
}

// KL(Dir(q) || Dir(p)), closed form
inline double dirichlet_kl(const std::vector<double>& q, const std::vector<double>& p) {
  if (q.size() != p.size()) throw ShapeError("dirichlet_kl: parameter length mismatch");
  double sq = 0.0, sp = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!(q[k] > 0.0) || !(p[k] > 0.0))
      throw DomainError("dirichlet_kl: non-positive parameter");
    sq += q[k];
    sp += p[k];
  }
  double kl = std::lgamma(sq) - std::lgamma(sp);
  const double psi_sq = digamma(sq);
  for (std::size_t k = 0; k < q.size(); ++k) {
    kl += std::lgamma(p[k]) - std::lgamma(q[k]);
    kl += (q[k] - p[k]) * (digamma(q[k]) - psi_sq);
  }
  return kl;
}

// log of the multivariate beta function
inline double log_beta(const std::vector<double>& alpha) {
  double total = 0.0, acc = 0.0;
  for (double a : alpha) {
    acc += std::lgamma(a);
    total += a;
  }
  return acc - std::lgamma(total);
}

}  // namespace cnsbm
