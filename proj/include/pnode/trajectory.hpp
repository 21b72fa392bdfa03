#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"
#include "pnode/problems.hpp"

namespace pnode {

/// Gaussian belief over the stacked derivatives. Column d of `mean` and
/// `cov[d]` describe output dimension d; dimensions are independent.
struct GaussianState {
  double t = 0.0;
  Eigen::MatrixXd mean;              // q x D
  std::vector<Eigen::MatrixXd> cov;  // D matrices of size q x q

  GaussianState() = default;
  GaussianState(double time, Eigen::MatrixXd m, std::vector<Eigen::MatrixXd> P)
      : t(time), mean(std::move(m)), cov(std::move(P)) {}

  /// Single output dimension.
  static GaussianState scalar(double time, const Eigen::VectorXd& m, const Eigen::MatrixXd& P) {
    return GaussianState(time, Eigen::MatrixXd(m), std::vector<Eigen::MatrixXd>{P});
  }

  [[nodiscard]] std::size_t order() const noexcept { return static_cast<std::size_t>(mean.rows()); }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(mean.cols()); }

  [[nodiscard]] bool all_finite() const {
    if (!mean.allFinite()) return false;
    for (const auto& P : cov) {
      if (!P.allFinite()) return false;
    }
    return true;
  }
};

struct SolutionTrajectory {
  std::vector<GaussianState> states;  // one per mesh point, including t0
  std::size_t evaluations = 0;        // dynamics evaluations
  std::size_t jacobian_evaluations = 0;

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
  [[nodiscard]] double t0() const { return states.front().t; }
  [[nodiscard]] double t_end() const { return states.back().t; }

  /// Mean of derivative `k` across output dimensions at mesh point `i`.
  [[nodiscard]] Eigen::VectorXd component(std::size_t i, std::size_t k) const {
    return states[i].mean.row(static_cast<Eigen::Index>(k)).transpose();
  }

  /// Mean of derivative `k` at time t. Mesh points are used directly; between
  /// mesh points the mean is interpolated linearly.
  [[nodiscard]] Eigen::VectorXd component_at(double t, std::size_t k) const {
    if (states.empty()) throw InvalidArgument("empty trajectory");
    const double a = t0();
    const double b = t_end();
    const double tol = 1e-9 * std::max(1.0, std::abs(b - a));
    if (t < a - tol || t > b + tol) {
      throw InvalidArgument("time " + std::to_string(t) + " outside trajectory span [" +
                            std::to_string(a) + ", " + std::to_string(b) + "]");
    }
    if (states.size() == 1) return component(0, k);
    const double h = (b - a) / static_cast<double>(states.size() - 1);
    const double s = (t - a) / h;
    const double nearest = std::round(s);
    if (std::abs(s - nearest) < 1e-9) return component(static_cast<std::size_t>(nearest), k);
    auto i = static_cast<std::size_t>(std::floor(s));
    if (i >= states.size() - 1) i = states.size() - 2;
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * component(i, k) + w * component(i + 1, k);
  }
};

/// Absolute error (Euclidean norm across output dimensions) of derivative
/// `derivative` between the trajectory mean and the reference at time t.
[[nodiscard]] inline double error_at(const SolutionTrajectory& trajectory, const ReferenceSolution& reference,
                                     double t, std::size_t derivative = 0) {
  const Eigen::VectorXd est = trajectory.component_at(t, derivative);
  const auto D = est.size();
  const Eigen::VectorXd full = reference.value(t);
  if ((static_cast<Eigen::Index>(derivative) + 1) * D > full.size()) {
    throw InvalidArgument("error_at: derivative " + std::to_string(derivative) + " is not tracked by the reference");
  }
  const Eigen::VectorXd truth = full.segment(static_cast<Eigen::Index>(derivative) * D, D);
  return (est - truth).norm();
}

}  // namespace pnode
