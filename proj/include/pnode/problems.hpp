#pragma once

// Initial value problems, ground-truth solutions and error measurement.
//
// A problem of order n and output dimension D is described through its
// "input vector" x of length n*D: x[k*D + d] holds the k-th derivative of
// output component d. Dynamics map (t, x) to the n-th derivative (length D).

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pnode/errors.hpp"

namespace pnode {

using Dynamics = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
/// D x (n*D) derivative of the dynamics with respect to the input vector.
using Jacobian = std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)>;
/// Closed-form solution: returns the input vector (all n*D components) at t.
using ClosedForm = std::function<Eigen::VectorXd(double)>;

struct IVProblem {
  std::string name;
  std::size_t order = 1;
  std::size_t dim = 1;
  Dynamics f;
  Jacobian jacobian;  // empty when no analytic Jacobian is known
  double t0 = 0.0;
  double t_end = 1.0;
  Eigen::VectorXd initial;  // length order * dim
  ClosedForm exact;         // empty when no closed form is known

  [[nodiscard]] std::size_t input_size() const noexcept { return order * dim; }

  void validate() const {
    if (order < 1 || dim < 1) throw InvalidArgument(name + ": order and dimension must be >= 1");
    if (!f) throw InvalidArgument(name + ": missing dynamics");
    if (static_cast<std::size_t>(initial.size()) != input_size()) {
      throw InvalidArgument(name + ": initial values must have length order*dim");
    }
    if (!(t_end > t0)) throw InvalidArgument(name + ": empty time span");
  }
};

/// u'' = mu (1 - u^2) u' - u on [10, 60] with (u, u')(10) = (2, 10).
[[nodiscard]] inline IVProblem vdp_problem(double mu = 5.0) {
  IVProblem p;
  p.name = "vdp";
  p.order = 2;
  p.dim = 1;
  p.f = [mu](double, const Eigen::VectorXd& x) {
    Eigen::VectorXd y(1);
    y(0) = mu * (1.0 - x(0) * x(0)) * x(1) - x(0);
    return y;
  };
  p.jacobian = [mu](double, const Eigen::VectorXd& x) {
    Eigen::MatrixXd J(1, 2);
    J(0, 0) = -2.0 * mu * x(0) * x(1) - 1.0;
    J(0, 1) = mu * (1.0 - x(0) * x(0));
    return J;
  };
  p.t0 = 10.0;
  p.t_end = 60.0;
  p.initial = Eigen::Vector2d(2.0, 10.0);
  return p;
}

/// u' = rate * u, u(0) = 1 on [0, 1]; closed form exp(rate * t).
[[nodiscard]] inline IVProblem linear_problem(double rate = -1.0, double t_end = 1.0) {
  IVProblem p;
  p.name = "linear";
  p.order = 1;
  p.dim = 1;
  p.f = [rate](double, const Eigen::VectorXd& x) { return Eigen::VectorXd(rate * x); };
  p.jacobian = [rate](double, const Eigen::VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, rate); };
  p.t0 = 0.0;
  p.t_end = t_end;
  p.initial = Eigen::VectorXd::Ones(1);
  p.exact = [rate](double t) { return Eigen::VectorXd::Constant(1, std::exp(rate * t)); };
  return p;
}

/// Registry used by the command-line tool.
[[nodiscard]] inline IVProblem problem_by_name(const std::string& name) {
  if (name == "vdp") return vdp_problem();
  if (name == "linear") return linear_problem();
  throw InvalidArgument("unknown problem '" + name + "' (expected vdp or linear)");
}

/// Derivative of the first-order reformulation z' = g(t, z) with z the input vector.
[[nodiscard]] inline Eigen::VectorXd first_order_rhs(const IVProblem& p, double t, const Eigen::VectorXd& z) {
  const auto D = static_cast<Eigen::Index>(p.dim);
  const auto n = static_cast<Eigen::Index>(p.order);
  Eigen::VectorXd dz(z.size());
  if (n > 1) dz.head((n - 1) * D) = z.segment(D, (n - 1) * D);
  dz.tail(D) = p.f(t, z);
  return dz;
}

/// Ground truth for a problem: closed form when available, otherwise a dense
/// classic RK4 table with cubic Hermite interpolation between mesh points.
class ReferenceSolution {
 public:
  ReferenceSolution(const IVProblem& problem, double h_ref) : t0_(problem.t0), t_end_(problem.t_end) {
    problem.validate();
    if (problem.exact) {
      exact_ = problem.exact;
      return;
    }
    if (!(h_ref > 0.0)) throw InvalidArgument("reference step must be positive");
    const double span = t_end_ - t0_;
    const auto steps = static_cast<std::size_t>(std::ceil(span / h_ref - 1e-9));
    h_ = span / static_cast<double>(steps);
    states_.reserve(steps + 1);
    slopes_.reserve(steps + 1);

    Eigen::VectorXd z = problem.initial;
    Eigen::VectorXd k1 = first_order_rhs(problem, t0_, z);
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = t0_ + static_cast<double>(s) * h_;
      states_.push_back(z);
      slopes_.push_back(k1);
      const Eigen::VectorXd k2 = first_order_rhs(problem, t + 0.5 * h_, z + 0.5 * h_ * k1);
      const Eigen::VectorXd k3 = first_order_rhs(problem, t + 0.5 * h_, z + 0.5 * h_ * k2);
      const Eigen::VectorXd k4 = first_order_rhs(problem, t + h_, z + h_ * k3);
      z += h_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite()) {
        throw DivergenceError("reference solve of '" + problem.name + "' diverged", t + h_, s + 1);
      }
      k1 = first_order_rhs(problem, t + h_, z);
    }
    states_.push_back(z);
    slopes_.push_back(k1);
  }

  [[nodiscard]] bool is_closed_form() const noexcept { return static_cast<bool>(exact_); }

  /// Input vector (all derivatives up to order n-1) at time t.
  [[nodiscard]] Eigen::VectorXd value(double t) const {
    if (t < t0_ - 1e-12 || t > t_end_ + 1e-12) {
      throw InvalidArgument("reference evaluated outside [" + std::to_string(t0_) + ", " +
                            std::to_string(t_end_) + "]");
    }
    if (exact_) return exact_(t);
    const double s = (t - t0_) / h_;
    auto k = static_cast<std::size_t>(std::floor(s));
    if (k >= states_.size() - 1) k = states_.size() - 2;
    const double nearest = std::round(s);
    if (std::abs(s - nearest) < 1e-9) return states_[static_cast<std::size_t>(nearest)];
    const double tau = s - static_cast<double>(k);
    const double h00 = (1 + 2 * tau) * (1 - tau) * (1 - tau);
    const double h10 = tau * (1 - tau) * (1 - tau);
    const double h01 = tau * tau * (3 - 2 * tau);
    const double h11 = tau * tau * (tau - 1);
    return h00 * states_[k] + h10 * h_ * slopes_[k] + h01 * states_[k + 1] + h11 * h_ * slopes_[k + 1];
  }

 private:
  double t0_;
  double t_end_;
  double h_ = 0.0;
  ClosedForm exact_;
  std::vector<Eigen::VectorXd> states_;
  std::vector<Eigen::VectorXd> slopes_;
};

[[nodiscard]] inline ReferenceSolution reference_solve(const IVProblem& problem, double h_ref) {
  return ReferenceSolution(problem, h_ref);
}

}  // namespace pnode
