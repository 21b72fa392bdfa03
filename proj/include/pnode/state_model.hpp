#pragma once

// q-times integrated Wiener process prior and its exact discretization.
//
// State component i (0-based here, 1-based in the usual notation) models the
// i-th derivative of the solution. The drift has damping factors f_1..f_{q-1}
// on its first super-diagonal; white noise of variance sigma2 drives the last
// component.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"

namespace pnode {

class IWPModel {
 public:
  /// damping must hold exactly q-1 entries.
  IWPModel(std::size_t q, double sigma2, std::vector<double> damping)
      : q_(q), sigma2_(sigma2), damping_(std::move(damping)) {
    if (q_ < 1) throw InvalidArgument("IWPModel: order q must be >= 1");
    if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_)) {
      throw InvalidArgument("IWPModel: sigma2 must be positive and finite");
    }
    if (damping_.size() != q_ - 1) {
      throw InvalidArgument("IWPModel: expected " + std::to_string(q_ - 1) +
                            " damping factors, got " + std::to_string(damping_.size()));
    }
  }

  /// Damping f_i = i, the usual default.
  static IWPModel with_default_damping(std::size_t q, double sigma2) {
    std::vector<double> f;
    for (std::size_t i = 1; i < q; ++i) f.push_back(static_cast<double>(i));
    return IWPModel(q, sigma2, std::move(f));
  }

  [[nodiscard]] std::size_t order() const noexcept { return q_; }
  [[nodiscard]] double sigma2() const noexcept { return sigma2_; }
  [[nodiscard]] const std::vector<double>& damping() const noexcept { return damping_; }

  /// Drift matrix F (q x q).
  [[nodiscard]] Eigen::MatrixXd drift() const {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(q_, q_);
    for (std::size_t i = 0; i + 1 < q_; ++i) F(i, i + 1) = damping_[i];
    return F;
  }

  /// Product f_a * ... * f_{b-1} over 1-based damping indices; 1 when empty.
  [[nodiscard]] double damping_product(std::size_t a, std::size_t b) const {
    double p = 1.0;
    for (std::size_t k = a; k < b; ++k) p *= damping_[k - 1];
    return p;
  }

 private:
  std::size_t q_;
  double sigma2_;
  std::vector<double> damping_;
};

struct TransitionPair {
  Eigen::MatrixXd A;
  Eigen::MatrixXd Qh;
  double h;
};

namespace detail {

inline double factorial(std::size_t n) {
  double r = 1.0;
  for (std::size_t k = 2; k <= n; ++k) r *= static_cast<double>(k);
  return r;
}

inline void require_positive_step(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw InvalidArgument("step size must be positive and finite, got " + std::to_string(h));
  }
}

}  // namespace detail

/// A(h) = exp(hF): upper triangular, unit diagonal,
/// A_ij = h^(j-i)/(j-i)! * f_i * ... * f_{j-1}.
[[nodiscard]] inline Eigen::MatrixXd transition_matrix(const IWPModel& model, double h) {
  detail::require_positive_step(h);
  const std::size_t q = model.order();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t i = 1; i <= q; ++i) {
    for (std::size_t j = i; j <= q; ++j) {
      const std::size_t d = j - i;
      A(i - 1, j - 1) = std::pow(h, static_cast<double>(d)) / detail::factorial(d) *
                        model.damping_product(i, j);
    }
  }
  return A;
}

/// Q(h) = int_0^h exp(Fs) L L^T exp(Fs)^T ds with L L^T = sigma2 e_q e_q^T.
[[nodiscard]] inline Eigen::MatrixXd process_noise(const IWPModel& model, double h) {
  detail::require_positive_step(h);
  const std::size_t q = model.order();
  Eigen::MatrixXd Q(q, q);
  for (std::size_t i = 1; i <= q; ++i) {
    for (std::size_t j = i; j <= q; ++j) {
      const std::size_t p = 2 * q + 1 - i - j;
      const double v = model.sigma2() * model.damping_product(i, q) * model.damping_product(j, q) *
                       std::pow(h, static_cast<double>(p)) /
                       (detail::factorial(q - i) * detail::factorial(q - j) * static_cast<double>(p));
      Q(i - 1, j - 1) = v;
      Q(j - 1, i - 1) = v;
    }
  }
  return Q;
}

[[nodiscard]] inline TransitionPair discretize(const IWPModel& model, double h) {
  return {transition_matrix(model, h), process_noise(model, h), h};
}

/// c_k = f_1 * ... * f_k (c_0 = 1). SDE component k+1 equals u^(k) / c_k, so
/// damping factors other than one make the raw components scaled derivatives.
[[nodiscard]] inline Eigen::VectorXd derivative_scales(const IWPModel& model) {
  const auto q = static_cast<Eigen::Index>(model.order());
  Eigen::VectorXd c(q);
  c(0) = 1.0;
  for (Eigen::Index k = 1; k < q; ++k) c(k) = c(k - 1) * model.damping()[static_cast<std::size_t>(k - 1)];
  return c;
}

/// A(h) and Q(h) expressed in derivative coordinates (component i is exactly
/// u^(i)): C A C^{-1} and C Q C with C = diag(derivative_scales).
[[nodiscard]] inline TransitionPair discretize_derivatives(const IWPModel& model, double h) {
  const Eigen::VectorXd c = derivative_scales(model);
  if (!(c.array().abs() > 0.0).all()) throw InvalidArgument("damping factors must be non-zero");
  const TransitionPair raw = discretize(model, h);
  return {c.asDiagonal() * raw.A * c.cwiseInverse().asDiagonal(), c.asDiagonal() * raw.Qh * c.asDiagonal(), h};
}

}  // namespace pnode
