#pragma once

// Bayesian quadrature against a Gaussian weight N(mu, Sigma) with a squared
// exponential kernel. For this pairing the kernel mean and the double
// integral of the kernel have closed forms, so a rule reduces to one
// N x N kernel solve.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"

namespace pnode {

using NodeVector = std::vector<Eigen::VectorXd>;

struct SEKernel {
  double lambda = 1.0;  // lengthscale
  double theta2 = 1.0;  // output variance

  void validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("SE kernel: lambda must be positive");
    if (!(theta2 > 0.0) || !std::isfinite(theta2)) throw InvalidArgument("SE kernel: theta2 must be positive");
  }

  [[nodiscard]] double operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return theta2 * std::exp(-0.5 * (a - b).squaredNorm() / (lambda * lambda));
  }
};

namespace detail {

inline void require_psd(const Eigen::MatrixXd& Sigma, const char* who) {
  if (Sigma.rows() != Sigma.cols()) throw InvalidArgument(std::string(who) + ": covariance must be square");
  if (!Sigma.allFinite()) throw InvalidArgument(std::string(who) + ": covariance is not finite");
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if (Sigma.size() > 0 && (Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidArgument(std::string(who) + ": covariance is not symmetric");
  }
  if (Sigma.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidArgument(std::string(who) + ": covariance is not positive semi-definite");
  }
}

inline void require_matching(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  if (x.size() != mu.size() || Sigma.rows() != mu.size()) {
    throw InvalidArgument("bayes_quad: node, mean and covariance dimensions disagree");
  }
}

/// Factor F with F F^T = Sigma. Cholesky when it succeeds, otherwise a
/// symmetric square root with negative eigenvalues clamped to zero.
struct CovarianceFactor {
  Eigen::MatrixXd L;
  bool degenerate = false;
};

inline CovarianceFactor covariance_factor(const Eigen::MatrixXd& Sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
    return {llt.matrixL().toDenseMatrix(), false};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Sigma);
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return {eig.eigenvectors() * root.asDiagonal(), true};
}

/// Offsets (in standard deviations) used by the multivariate grid, level by level.
inline const std::vector<double>& grid_ladder() {
  static const std::vector<double> ladder = [] {
    std::vector<double> l{1.0, 2.0, 0.5, 1.5, 2.5, 3.0};
    for (double step : {0.25, 0.125}) {
      for (double c = step; c < 3.0; c += 2.0 * step) l.push_back(c);
    }
    return l;
  }();
  return ladder;
}

}  // namespace detail

/// alpha_i = int k(x, node) N(x; mu, Sigma) dx
///         = theta2 det(I + Sigma/lambda^2)^(-1/2) exp(-1/2 (node-mu)^T (lambda^2 I + Sigma)^(-1) (node-mu)).
[[nodiscard]] inline double kernel_mean(const SEKernel& kernel, const Eigen::VectorXd& node, const Eigen::VectorXd& mu,
                                        const Eigen::MatrixXd& Sigma) {
  kernel.validate();
  detail::require_matching(node, mu, Sigma);
  detail::require_psd(Sigma, "kernel_mean");
  const double l2 = kernel.lambda * kernel.lambda;
  const auto d = mu.size();
  if (d == 1) {
    const double s2 = Sigma(0, 0);
    const double diff = node(0) - mu(0);
    return kernel.lambda * kernel.theta2 / std::sqrt(l2 + s2) * std::exp(-diff * diff / (2.0 * (l2 + s2)));
  }
  const Eigen::MatrixXd B = Sigma + l2 * Eigen::MatrixXd::Identity(d, d);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(B);
  const Eigen::VectorXd diff = node - mu;
  const double quad = diff.dot(ldlt.solve(diff));
  const double det = (Eigen::MatrixXd::Identity(d, d) + Sigma / l2).determinant();
  return kernel.theta2 / std::sqrt(det) * std::exp(-0.5 * quad);
}

/// int int k(x, x') N(x; mu, Sigma) N(x'; mu, Sigma) dx dx' = theta2 det(I + 2 Sigma/lambda^2)^(-1/2).
[[nodiscard]] inline double double_integral(const SEKernel& kernel, const Eigen::MatrixXd& Sigma) {
  kernel.validate();
  detail::require_psd(Sigma, "double_integral");
  const double l2 = kernel.lambda * kernel.lambda;
  const auto d = Sigma.rows();
  if (d == 1) return kernel.theta2 / std::sqrt(1.0 + 2.0 * Sigma(0, 0) / l2);
  const double det = (Eigen::MatrixXd::Identity(d, d) + 2.0 * Sigma / l2).determinant();
  return kernel.theta2 / std::sqrt(det);
}

struct NodeSet {
  NodeVector nodes;
  Eigen::VectorXd weights;  // classic quadrature weights, when the scheme has them
  bool degenerate_covariance = false;  // Cholesky failed; eigen-factor used
};

/// Uniform grid scaled by N(mu, Sigma).
///
/// One input dimension: mu + sqrt(Sigma) * linspace(-spread, spread, N).
/// Several dimensions: the center, then mu +- c L e_j for each column j of the
/// Cholesky factor L, with c running through 1, 2, 0.5, 1.5, 2.5, 3, ...
/// until N nodes exist.
[[nodiscard]] inline NodeSet grid_nodes(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, std::size_t N,
                                        double spread = 2.0) {
  if (N < 1) throw InvalidArgument("grid_nodes: N must be >= 1");
  if (!(spread > 0.0)) throw InvalidArgument("grid_nodes: spread must be positive");
  if (Sigma.rows() != mu.size() || Sigma.cols() != mu.size()) {
    throw InvalidArgument("grid_nodes: mean and covariance dimensions disagree");
  }
  const auto factor = detail::covariance_factor(Sigma);
  NodeSet out;
  out.degenerate_covariance = factor.degenerate;
  const auto d = mu.size();
  if (d == 1) {
    const double sd = factor.L(0, 0);
    for (std::size_t i = 0; i < N; ++i) {
      const double c = N == 1 ? 0.0 : -spread + 2.0 * spread * static_cast<double>(i) / static_cast<double>(N - 1);
      out.nodes.push_back(mu + Eigen::VectorXd::Constant(1, c * sd));
    }
    return out;
  }
  out.nodes.push_back(mu);
  const auto& ladder = detail::grid_ladder();
  for (std::size_t level = 0; out.nodes.size() < N; ++level) {
    if (level >= ladder.size()) throw InvalidArgument("grid_nodes: too many nodes requested");
    for (Eigen::Index j = 0; j < d && out.nodes.size() < N; ++j) {
      out.nodes.push_back(mu + ladder[level] * factor.L.col(j));
      if (out.nodes.size() < N) out.nodes.push_back(mu - ladder[level] * factor.L.col(j));
    }
  }
  return out;
}

/// Roots r_i of the physicists' Hermite polynomial H_N in ascending order and
/// the matching Gauss-Hermite weights for the weight exp(-x^2) (they sum to sqrt(pi)).
/// Newton iteration on the orthonormal three-term recurrence.
[[nodiscard]] inline std::pair<Eigen::VectorXd, Eigen::VectorXd> hermite_roots(std::size_t N) {
  if (N < 1) throw InvalidArgument("hermite_roots: N must be >= 1");
  constexpr int kMaxIter = 100;
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const double n = static_cast<double>(N);
  Eigen::VectorXd x(N);
  Eigen::VectorXd w(N);
  const std::size_t half = (N + 1) / 2;
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x(0);
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x(1);
    } else {
      z = 2.0 * z - x(static_cast<Eigen::Index>(i - 2));
    }
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= N; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jj = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / jj) * p2 - std::sqrt((jj - 1.0) / jj) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw std::runtime_error("hermite_roots: Newton iteration did not converge for N=" + std::to_string(N));
    }
    const auto ii = static_cast<Eigen::Index>(i);
    x(ii) = z;
    x(static_cast<Eigen::Index>(N - 1 - i)) = -z;
    w(ii) = 2.0 / (pp * pp);
    w(static_cast<Eigen::Index>(N - 1 - i)) = w(ii);
  }
  // Newton ran from the largest root downwards; flip to ascending order.
  return {x.reverse(), w.reverse()};
}

/// Gauss-Hermite nodes for N(mu, Sigma): mu + sqrt(2 Sigma) r_i, with classic
/// weights normalized to sum to one. In several dimensions the per-axis rule
/// is tensorized and truncated to the N points of largest product weight.
[[nodiscard]] inline NodeSet hermite_nodes(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma, std::size_t N) {
  if (N < 1) throw InvalidArgument("hermite_nodes: N must be >= 1");
  if (Sigma.rows() != mu.size() || Sigma.cols() != mu.size()) {
    throw InvalidArgument("hermite_nodes: mean and covariance dimensions disagree");
  }
  const auto factor = detail::covariance_factor(Sigma);
  const auto d = static_cast<std::size_t>(mu.size());
  NodeSet out;
  out.degenerate_covariance = factor.degenerate;

  std::size_t per_axis = 1;
  while (std::pow(static_cast<double>(per_axis), static_cast<double>(d)) < static_cast<double>(N)) ++per_axis;
  const auto [roots, raw] = hermite_roots(d == 1 ? N : per_axis);
  const Eigen::VectorXd axis_w = raw / std::sqrt(std::numbers::pi);
  const Eigen::VectorXd axis_z = std::sqrt(2.0) * roots;

  // Enumerate the tensor grid, keep the N heaviest points (stable on ties).
  const auto m = static_cast<std::size_t>(axis_z.size());
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) total *= m;
  std::vector<std::pair<double, std::vector<std::size_t>>> cells;
  cells.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::vector<std::size_t> idx(d);
    std::size_t rest = flat;
    double weight = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      idx[k] = rest % m;
      rest /= m;
      weight *= axis_w(static_cast<Eigen::Index>(idx[k]));
    }
    cells.emplace_back(weight, std::move(idx));
  }
  std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  cells.resize(std::min(N, cells.size()));

  out.weights.resize(static_cast<Eigen::Index>(cells.size()));
  double sum = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) z(static_cast<Eigen::Index>(k)) = axis_z(static_cast<Eigen::Index>(cells[c].second[k]));
    out.nodes.push_back(mu + factor.L * z);
    out.weights(static_cast<Eigen::Index>(c)) = cells[c].first;
    sum += cells[c].first;
  }
  out.weights /= sum;
  return out;
}

struct QuadratureRule {
  NodeVector nodes;
  Eigen::VectorXd weights;  // W = K^{-1} alpha
  double variance = 0.0;    // integral variance, clamped at zero
  SEKernel kernel;
  Eigen::VectorXd mu;
  Eigen::MatrixXd Sigma;
  double jitter = 0.0;  // diagonal nugget used in the solve

  /// Posterior mean of the integral given f evaluated at `nodes` (one row per node).
  [[nodiscard]] Eigen::VectorXd apply(const Eigen::MatrixXd& values) const { return values.transpose() * weights; }
  [[nodiscard]] double apply(const Eigen::VectorXd& values) const { return weights.dot(values); }
  [[nodiscard]] std::size_t size() const noexcept { return nodes.size(); }
};

/// Nodes closer than 1e-10 * lambda to an earlier node are dropped.
[[nodiscard]] inline NodeVector deduplicate_nodes(const NodeVector& nodes, double lambda) {
  NodeVector out;
  const double tol = 1e-10 * lambda;
  for (const auto& x : nodes) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const auto& y) { return (x - y).norm() <= tol; });
    if (!dup) out.push_back(x);
  }
  return out;
}

/// Weights and integral variance of the BQ rule for `nodes` under N(mu, Sigma).
///
/// The kernel matrix always carries a diagonal nugget, starting at 1e-12 theta2
/// and escalating through 1e-10, 1e-8, 1e-6 theta2 until the Cholesky solve succeeds.
[[nodiscard]] inline QuadratureRule build_rule(const SEKernel& kernel, const NodeVector& nodes,
                                               const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma) {
  kernel.validate();
  if (nodes.empty()) throw InvalidArgument("build_rule: empty node set");
  detail::require_psd(Sigma, "build_rule");
  for (const auto& x : nodes) detail::require_matching(x, mu, Sigma);

  QuadratureRule rule;
  rule.kernel = kernel;
  rule.mu = mu;
  rule.Sigma = Sigma;
  rule.nodes = deduplicate_nodes(nodes, kernel.lambda);
  const auto n = static_cast<Eigen::Index>(rule.nodes.size());

  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd alpha(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    alpha(i) = kernel_mean(kernel, rule.nodes[i], mu, Sigma);
    K(i, i) = kernel.theta2;
    for (Eigen::Index j = 0; j < i; ++j) {
      K(i, j) = K(j, i) = kernel(rule.nodes[i], rule.nodes[j]);
    }
  }

  constexpr std::array<double, 4> kJitter{1e-12, 1e-10, 1e-8, 1e-6};
  for (const double rel : kJitter) {
    const double jitter = rel * kernel.theta2;
    const Eigen::MatrixXd Kj = K + jitter * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd W = llt.solve(alpha);
    if (!W.allFinite() || (Kj * W - alpha).norm() > 1e-8 * alpha.norm() + 1e-300) continue;
    rule.weights = W;
    rule.jitter = jitter;
    rule.variance = std::max(0.0, double_integral(kernel, Sigma) - alpha.dot(W));
    return rule;
  }

  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double dist = (rule.nodes[i] - rule.nodes[j]).norm();
      dmin = std::min(dmin, dist);
      dmax = std::max(dmax, dist);
    }
  }
  std::ostringstream msg;
  msg << "kernel matrix ill-conditioned for N=" << n << " nodes (pairwise distance in [" << dmin << ", " << dmax
      << "], lambda=" << kernel.lambda << ")";
  throw QuadratureConditioningError(msg.str());
}

}  // namespace pnode
